//! Càdlàg paths sampled on a finite grid with explicitly marked jumps.
//!
//! Between grid points a path is linear, running from `values[i]` to
//! `left_values[i + 1]`. A piecewise-constant path is the special case
//! `left_values[i + 1] == values[i]`, so both interpolation rules share one
//! evaluator and only differ in how [`CadlagPath::with_rule`] derives left limits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::PathError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    PiecewiseConstant,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    grid: Vec<f64>,
    values: Vec<f64>,
    left_values: Vec<f64>,
    is_jump: Vec<bool>,
    rule: Interpolation,
}

/// Builds a linear path with the given jumps, each as `(index, left_value)`.
pub fn make_path(grid: Vec<f64>, values: Vec<f64>, jumps: &[(usize, f64)]) -> Result<CadlagPath, PathError> {
    CadlagPath::with_rule(grid, values, jumps, Interpolation::Linear)
}

fn check_grid(grid: &[f64]) -> Result<(), PathError> {
    let first = *grid.first().ok_or(PathError::EmptyGrid)?;
    if first != 0.0 {
        return Err(PathError::GridStart(first));
    }
    for (i, w) in grid.windows(2).enumerate() {
        if !w[1].is_finite() {
            return Err(PathError::NonFinite(i + 1));
        }
        if w[1] <= w[0] {
            return Err(PathError::NonMonotoneGrid(i + 1));
        }
    }
    Ok(())
}

impl CadlagPath {
    pub fn with_rule(grid: Vec<f64>, values: Vec<f64>, jumps: &[(usize, f64)], rule: Interpolation) -> Result<Self, PathError> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(PathError::LengthMismatch { grid: grid.len(), values: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PathError::NonFinite(i));
        }
        let n = grid.len();
        let mut is_jump = vec![false; n];
        let mut left_values = match rule {
            Interpolation::Linear => values.clone(),
            Interpolation::PiecewiseConstant => {
                let mut lv = Vec::with_capacity(n);
                lv.push(values[0]);
                lv.extend_from_slice(&values[..n - 1]);
                lv
            }
        };
        for &(i, left) in jumps {
            if i == 0 || i >= n {
                return Err(PathError::JumpIndex(i));
            }
            if !left.is_finite() {
                return Err(PathError::NonFinite(i));
            }
            if left == values[i] {
                return Err(PathError::ZeroJump(i));
            }
            if rule == Interpolation::PiecewiseConstant && left != values[i - 1] {
                return Err(PathError::InconsistentLeftValue(i));
            }
            is_jump[i] = true;
            left_values[i] = left;
        }
        if rule == Interpolation::PiecewiseConstant {
            if let Some(i) = (1..n).find(|&i| !is_jump[i] && values[i] != values[i - 1]) {
                return Err(PathError::UnmarkedDiscontinuity(i));
            }
        }
        Ok(Self { grid, values, left_values, is_jump, rule })
    }

    /// Builds a path from right values and left limits, marking a jump
    /// wherever the two differ. The result uses the linear rule.
    pub fn from_limits(grid: Vec<f64>, values: Vec<f64>, mut left_values: Vec<f64>) -> Result<Self, PathError> {
        check_grid(&grid)?;
        if grid.len() != values.len() || grid.len() != left_values.len() {
            return Err(PathError::LengthMismatch { grid: grid.len(), values: values.len().min(left_values.len()) });
        }
        if let Some(i) = values.iter().chain(left_values.iter()).position(|v| !v.is_finite()) {
            return Err(PathError::NonFinite(i % grid.len()));
        }
        left_values[0] = values[0];
        let is_jump = values.iter().zip(&left_values).map(|(v, l)| v != l).collect();
        Ok(Self { grid, values, left_values, is_jump, rule: Interpolation::Linear })
    }

    /// Step-function path: `values[i]` holds on `[t_i, t_{i+1})`, jumps marked automatically.
    pub fn piecewise_constant(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, PathError> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(PathError::LengthMismatch { grid: grid.len(), values: values.len() });
        }
        let jumps: Vec<(usize, f64)> =
            (1..values.len()).filter(|&i| values[i] != values[i - 1]).map(|i| (i, values[i - 1])).collect();
        Self::with_rule(grid, values, &jumps, Interpolation::PiecewiseConstant)
    }

    pub fn constant(horizon: f64, n: usize, c: f64) -> Result<Self, PathError> {
        let grid = uniform_grid(horizon, n);
        let len = grid.len();
        Self::with_rule(grid, vec![c; len], &[], Interpolation::PiecewiseConstant)
    }

    /// Continuous linear interpolation of `f` on `grid`.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self, PathError> {
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::with_rule(grid, values, &[], Interpolation::Linear)
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("grid is never empty")
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_values(&self) -> &[f64] {
        &self.left_values
    }

    pub fn rule(&self) -> Interpolation {
        self.rule
    }

    pub fn is_jump(&self, i: usize) -> bool {
        self.is_jump[i]
    }

    pub fn jump_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.is_jump.iter().enumerate().filter(|(_, &j)| j).map(|(i, _)| i)
    }

    pub fn has_jumps(&self) -> bool {
        self.is_jump.iter().any(|&j| j)
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("grid is never empty")
    }

    /// Index `i` of the grid cell `[t_i, t_{i+1})` containing `t`, clamped to the last cell.
    pub fn segment(&self, t: f64) -> usize {
        let k = self.grid.partition_point(|&g| g <= t);
        k.saturating_sub(1).min(self.grid.len().saturating_sub(2))
    }

    /// Value of the linear piece on cell `i`, extended to its closed endpoints.
    #[inline]
    pub fn piece(&self, i: usize, t: f64) -> f64 {
        let (a, b) = (self.grid[i], self.grid[i + 1]);
        let (va, vb) = (self.values[i], self.left_values[i + 1]);
        if va == vb {
            va
        } else {
            va + (vb - va) * ((t - a) / (b - a))
        }
    }

    /// X(t), right-continuous; X(T) beyond the horizon and X(0) before the origin.
    pub fn value_at(&self, t: f64) -> f64 {
        if t >= self.horizon() {
            return self.terminal();
        }
        if t <= 0.0 {
            return self.values[0];
        }
        let i = self.segment(t);
        if t == self.grid[i] {
            self.values[i]
        } else {
            self.piece(i, t)
        }
    }

    /// X(t−) for t > 0.
    pub fn left_limit(&self, t: f64) -> Result<f64, PathError> {
        if t <= 0.0 {
            return Err(PathError::LeftLimitAtOrigin(t));
        }
        if t > self.horizon() {
            return Ok(self.terminal());
        }
        let k = self.grid.partition_point(|&g| g < t);
        if k < self.grid.len() && self.grid[k] == t {
            return Ok(self.left_values[k]);
        }
        Ok(self.piece(k - 1, t))
    }

    /// Marked jumps as `(time, size)`.
    pub fn jumps_of(&self) -> Vec<(f64, f64)> {
        self.jump_indices().map(|i| (self.grid[i], self.values[i] - self.left_values[i])).collect()
    }

    pub fn sum_squared_jumps(&self) -> f64 {
        self.jump_indices().map(|i| (self.values[i] - self.left_values[i]).powi(2)).sum()
    }

    pub fn min_spacing(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Inserts extra grid points. Values and left limits everywhere are unchanged.
    pub fn refine(&self, times: &[f64]) -> Result<Self, PathError> {
        let mut extra: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0 && t < self.horizon()).collect();
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        if extra.is_empty() {
            return Ok(self.clone());
        }
        let n = self.grid.len() + extra.len();
        let (mut grid, mut values, mut left, mut jumps) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let mut e = 0;
        for i in 0..self.grid.len() {
            if i > 0 {
                while e < extra.len() && extra[e] < self.grid[i] {
                    let t = extra[e];
                    if t > self.grid[i - 1] {
                        let v = self.piece(i - 1, t);
                        grid.push(t);
                        values.push(v);
                        left.push(v);
                        jumps.push(false);
                    }
                    e += 1;
                }
            }
            while e < extra.len() && extra[e] == self.grid[i] {
                e += 1;
            }
            grid.push(self.grid[i]);
            values.push(self.values[i]);
            left.push(self.left_values[i]);
            jumps.push(self.is_jump[i]);
        }
        Ok(Self { grid, values, left_values: left, is_jump: jumps, rule: self.rule })
    }

    /// Restricts to `[0, t_end]`, inserting `t_end` as the new horizon.
    pub fn restrict(&self, t_end: f64) -> Result<Self, PathError> {
        if t_end >= self.horizon() {
            return Ok(self.clone());
        }
        let p = self.refine(&[t_end])?;
        let k = p.grid.partition_point(|&g| g <= t_end);
        let mut out = Self {
            grid: p.grid[..k].to_vec(),
            values: p.values[..k].to_vec(),
            left_values: p.left_values[..k].to_vec(),
            is_jump: p.is_jump[..k].to_vec(),
            rule: p.rule,
        };
        // the restricted path is continuous at its new horizon from the left
        let last = k - 1;
        if last > 0 && out.grid[last] == t_end && !self.grid.contains(&t_end) {
            out.is_jump[last] = false;
        }
        Ok(out)
    }

    /// Both paths on the union of their grids.
    pub fn align(&self, other: &Self) -> Result<(Self, Self), PathError> {
        if self.horizon() != other.horizon() {
            return Err(PathError::HorizonMismatch(self.horizon(), other.horizon()));
        }
        if self.grid == other.grid {
            return Ok((self.clone(), other.clone()));
        }
        Ok((self.refine(&other.grid)?, other.refine(&self.grid)?))
    }

    /// Pointwise transform `(t, x) -> h(t, x)` applied to values and left limits.
    pub fn map(&self, h: impl Fn(f64, f64) -> f64) -> Self {
        let values: Vec<f64> = self.grid.iter().zip(&self.values).map(|(&t, &x)| h(t, x)).collect();
        let mut left: Vec<f64> = self.grid.iter().zip(&self.left_values).map(|(&t, &x)| h(t, x)).collect();
        left[0] = values[0];
        let is_jump = values.iter().zip(&left).map(|(v, l)| v != l).collect();
        let rule = if self.rule == Interpolation::PiecewiseConstant && is_time_free(&values, &left) {
            Interpolation::PiecewiseConstant
        } else {
            Interpolation::Linear
        };
        Self { grid: self.grid.clone(), values, left_values: left, is_jump, rule }
    }

    /// Pointwise combination of two paths on the union grid.
    pub fn zip_with(&self, other: &Self, h: impl Fn(f64, f64) -> f64) -> Result<Self, PathError> {
        let (a, b) = self.align(other)?;
        let values: Vec<f64> = a.values.iter().zip(&b.values).map(|(&x, &y)| h(x, y)).collect();
        let mut left: Vec<f64> = a.left_values.iter().zip(&b.left_values).map(|(&x, &y)| h(x, y)).collect();
        left[0] = values[0];
        let is_jump = values.iter().zip(&left).map(|(v, l)| v != l).collect();
        let rule = if a.rule == Interpolation::PiecewiseConstant && b.rule == Interpolation::PiecewiseConstant {
            Interpolation::PiecewiseConstant
        } else {
            Interpolation::Linear
        };
        Ok(Self { grid: a.grid, values, left_values: left, is_jump, rule })
    }

    pub fn add(&self, other: &Self) -> Result<Self, PathError> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PathError> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut p = self.map(|_, x| c * x);
        p.rule = self.rule;
        p
    }

    pub fn linear_combination(a: f64, x: &Self, b: f64, y: &Self) -> Result<Self, PathError> {
        x.zip_with(y, |u, v| a * u + b * v)
    }

    /// sup over grid points of |X(t)| and |X(t−)|.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().chain(&self.left_values).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// sup over the union grid of the difference of values and of left limits.
    pub fn sup_distance(&self, other: &Self) -> Result<f64, PathError> {
        Ok(self.sub(other)?.sup_norm())
    }

    /// Total variation over the grid, counting jumps and continuous pieces.
    pub fn total_variation(&self) -> f64 {
        (1..self.len())
            .map(|i| (self.left_values[i] - self.values[i - 1]).abs() + (self.values[i] - self.left_values[i]).abs())
            .sum()
    }

    /// Running maximum, applied to values and left limits in time order.
    pub fn running_max(&self) -> Self {
        let mut m = f64::NEG_INFINITY;
        let mut values = Vec::with_capacity(self.len());
        let mut left = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            m = m.max(self.left_values[i]);
            left.push(m);
            m = m.max(self.values[i]);
            values.push(m);
        }
        left[0] = values[0];
        let is_jump = values.iter().zip(&left).map(|(v, l)| v != l).collect();
        Self { grid: self.grid.clone(), values, left_values: left, is_jump, rule: Interpolation::Linear }
    }

    /// ∫_0^T X(s) ds, exact for the interpolated path.
    pub fn integral(&self) -> f64 {
        (0..self.len() - 1).map(|i| 0.5 * (self.values[i] + self.left_values[i + 1]) * (self.grid[i + 1] - self.grid[i])).sum()
    }

    /// Running integral t ↦ ∫_0^t X(s) ds as a continuous path.
    pub fn running_integral(&self) -> Self {
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(self.len());
        values.push(0.0);
        for i in 0..self.len() - 1 {
            acc += 0.5 * (self.values[i] + self.left_values[i + 1]) * (self.grid[i + 1] - self.grid[i]);
            values.push(acc);
        }
        Self {
            grid: self.grid.clone(),
            left_values: values.clone(),
            values,
            is_jump: vec![false; self.len()],
            rule: Interpolation::Linear,
        }
    }

    pub fn to_csv<W: Write>(&self, w: W) -> Result<(), PathError> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| PathError::Csv(e.to_string());
        wr.write_record(["t", "value", "left_value", "is_jump"]).map_err(err)?;
        for i in 0..self.len() {
            wr.write_record([
                self.grid[i].to_string(),
                self.values[i].to_string(),
                self.left_values[i].to_string(),
                u8::from(self.is_jump[i]).to_string(),
            ])
            .map_err(err)?;
        }
        wr.flush().map_err(|e| PathError::Csv(e.to_string()))
    }

    pub fn from_csv<R: Read>(r: R) -> Result<Self, PathError> {
        let mut rd = csv::Reader::from_reader(r);
        let (mut grid, mut values, mut left, mut jumps) = (vec![], vec![], vec![], vec![]);
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| PathError::Csv(e.to_string()))?;
            if rec.len() != 4 {
                return Err(PathError::Csv(format!("row {i}: expected 4 columns")));
            }
            let num = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| PathError::Csv(format!("row {i}: {e}")));
            grid.push(num(0)?);
            values.push(num(1)?);
            left.push(num(2)?);
            let j = rec[3].trim();
            if j == "1" {
                jumps.push((i, left[i]));
            } else if j != "0" {
                return Err(PathError::Csv(format!("row {i}: is_jump must be 0 or 1")));
            }
        }
        let n = grid.len();
        let pc = (1..n).all(|i| left[i] == values[i - 1]);
        let rule = if pc && n > 1 { Interpolation::PiecewiseConstant } else { Interpolation::Linear };
        let mut p = Self::with_rule(grid, values, &jumps, rule)?;
        if rule == Interpolation::Linear {
            // keep the stored left limits verbatim
            for (i, &l) in left.iter().enumerate().skip(1) {
                if !p.is_jump[i] && l != p.values[i] {
                    return Err(PathError::UnmarkedDiscontinuity(i));
                }
            }
        }
        p.left_values[0] = left.first().copied().unwrap_or(p.values[0]);
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String, PathError> {
        serde_json::to_string(&PathJson::from(self)).map_err(|e| PathError::Json(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, PathError> {
        let j: PathJson = serde_json::from_str(s).map_err(|e| PathError::Json(e.to_string()))?;
        j.try_into()
    }
}

fn is_time_free(values: &[f64], left: &[f64]) -> bool {
    (1..values.len()).all(|i| left[i] == values[i - 1])
}

/// Uniform grid with `n` cells on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    if horizon == 0.0 || n == 0 {
        return vec![0.0];
    }
    let mut g: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
    g[n] = horizon;
    g
}

/// Compact JSON form: jumps listed by index with their left values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathJson {
    pub schema_version: u32,
    pub interpolation: Interpolation,
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub jumps: Vec<(usize, f64)>,
}

impl From<&CadlagPath> for PathJson {
    fn from(p: &CadlagPath) -> Self {
        Self {
            schema_version: 1,
            interpolation: p.rule,
            t: p.grid.clone(),
            value: p.values.clone(),
            jumps: p.jump_indices().map(|i| (i, p.left_values[i])).collect(),
        }
    }
}

impl TryFrom<PathJson> for CadlagPath {
    type Error = PathError;
    fn try_from(j: PathJson) -> Result<Self, PathError> {
        CadlagPath::with_rule(j.t, j.value, &j.jumps, j.interpolation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> CadlagPath {
        make_path(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 1.0], &[(1, 0.0)]).unwrap()
    }

    #[test]
    fn constant_zero_path() {
        let p = make_path(vec![0.0, 1.0], vec![0.0, 0.0], &[]).unwrap();
        assert_eq!(p.value_at(0.3), 0.0);
        assert!(p.jumps_of().is_empty());
    }

    #[test]
    fn step_values_and_limits() {
        let p = step();
        assert_eq!(p.value_at(0.5), 1.0);
        assert_eq!(p.value_at(2.0), 1.0);
        assert_eq!(p.value_at(0.25), 0.0);
        assert_eq!(p.left_limit(0.5).unwrap(), 0.0);
        assert_eq!(p.left_limit(0.75).unwrap(), 1.0);
        assert!(p.left_limit(0.0).is_err());
        assert_eq!(p.jumps_of(), vec![(0.5, 1.0)]);
        assert_eq!(p.sum_squared_jumps(), 1.0);
    }

    #[test]
    fn linear_interpolation() {
        let p = make_path(vec![0.0, 1.0], vec![0.0, 1.0], &[]).unwrap();
        assert_eq!(p.value_at(0.25), 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(make_path(vec![0.0, 0.6, 0.5, 1.0], vec![0.0; 4], &[]).unwrap_err(), PathError::NonMonotoneGrid(2));
        assert_eq!(make_path(vec![0.0, 1.0], vec![0.0], &[]).unwrap_err(), PathError::LengthMismatch { grid: 2, values: 1 });
        assert_eq!(make_path(vec![0.0, 1.0], vec![0.0, 1.0], &[(1, 1.0)]).unwrap_err(), PathError::ZeroJump(1));
        assert!(CadlagPath::with_rule(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 1.0], &[], Interpolation::PiecewiseConstant).is_err());
    }

    #[test]
    fn two_jumps_squared_sum() {
        let p = CadlagPath::piecewise_constant(vec![0.0, 0.3, 0.6, 1.0], vec![0.0, 2.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.sum_squared_jumps(), 5.0);
    }

    #[test]
    fn refine_keeps_values() {
        let p = make_path(vec![0.0, 0.5, 1.0], vec![0.0, 3.0, 2.0], &[(1, 1.0)]).unwrap();
        let r = p.refine(&[0.1, 0.25, 0.5, 0.7, 0.99]).unwrap();
        for &t in &[0.05, 0.1, 0.25, 0.3, 0.5, 0.6, 0.7, 0.8, 0.99, 1.0] {
            assert_eq!(p.value_at(t), r.value_at(t));
            assert_eq!(p.left_limit(t).unwrap(), r.left_limit(t).unwrap());
        }
        assert_eq!(r.jumps_of(), p.jumps_of());
    }

    #[test]
    fn restrict_sets_new_horizon() {
        let p = make_path(vec![0.0, 0.5, 1.0], vec![0.0, 3.0, 2.0], &[(1, 1.0)]).unwrap();
        let r = p.restrict(0.75).unwrap();
        assert_eq!(r.horizon(), 0.75);
        assert_eq!(r.value_at(0.75), p.value_at(0.75));
        assert_eq!(r.jumps_of(), p.jumps_of());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = make_path(vec![0.0, 0.1, 0.30000000000000004, 1.0], vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0], &[(2, 0.2)]).unwrap();
        let mut buf = Vec::new();
        p.to_csv(&mut buf).unwrap();
        let q = CadlagPath::from_csv(&buf[..]).unwrap();
        let mut buf2 = Vec::new();
        q.to_csv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(p, q);
    }

    #[test]
    fn json_round_trip() {
        let p = step();
        let q = CadlagPath::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p.values(), q.values());
        assert_eq!(p.jumps_of(), q.jumps_of());
    }

    #[test]
    fn running_integral_of_linear() {
        let p = CadlagPath::from_fn(uniform_grid(1.0, 10), |t| t).unwrap();
        assert!((p.running_integral().terminal() - 0.5).abs() < 1e-15);
    }
}
