//! Polarimetric receive-array manifold.
//!
//! Every receiver port answers a plane wave from direction `(azimuth,
//! elevation)` with a pair of complex gains `(b_H, b_V)`, one per incident
//! polarization. The analytic model treats each port as an ideal short dipole
//! along a fixed axis, placed at a position measured in wavelengths:
//!
//! ```text
//! b_V = (d . e_theta) * rho,   b_H = (d . e_phi) * rho,   rho = exp(+j 2 pi r . k)
//! ```
//!
//! with `k = (cos el cos az, cos el sin az, sin el)`, elevation measured from the
//! horizon. A [`PatternGrid`] stores sampled gains instead (for example from a
//! calibration campaign) and interpolates bilinearly.
//!
//! Steering matrices place path `p` in columns `2p` (H) and `2p + 1` (V).

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CMatrix, Complex64, Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-12;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Direction of arrival. Azimuth is kept in `(-pi, pi]`, elevation in
/// `[-pi/2, pi/2]` measured from the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    /// Builds a direction, wrapping the azimuth. Elevations outside
    /// `[-pi/2, pi/2]` are rejected.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite direction ({azimuth}, {elevation})"
            )));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&elevation) {
            return Err(Error::Domain(format!(
                "elevation {elevation} rad outside [-pi/2, pi/2]"
            )));
        }
        Ok(Self {
            azimuth: wrap_angle(azimuth),
            elevation,
        })
    }

    /// Maps any finite `(azimuth, elevation)` pair onto the physical direction
    /// it denotes: elevations past a pole are folded back and the azimuth
    /// turned by pi.
    pub fn folded(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite direction ({azimuth}, {elevation})"
            )));
        }
        let (azimuth, elevation) = fold_elevation(azimuth, elevation);
        Self::new(azimuth, elevation)
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    /// Unit propagation vector towards the source.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        [ce * ca, ce * sa, se]
    }

    /// Unit vector of increasing elevation (V polarization).
    pub fn e_theta(&self) -> [f64; 3] {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        [-se * ca, -se * sa, ce]
    }

    /// Unit vector of increasing azimuth (H polarization).
    pub fn e_phi(&self) -> [f64; 3] {
        let (sa, ca) = self.azimuth.sin_cos();
        [-sa, ca, 0.0]
    }
}

/// Reflects elevation across the poles until it lies in `[-pi/2, pi/2]`,
/// turning the azimuth by pi for every reflection.
pub fn fold_elevation(azimuth: f64, elevation: f64) -> (f64, f64) {
    // Elevation is 2*pi periodic on the sphere once the azimuth flip is
    // accounted for; bring it into (-pi, pi] first.
    let mut el = wrap_angle(elevation);
    let mut az = azimuth;
    if el > PI / 2.0 {
        el = PI - el;
        az += PI;
    } else if el < -PI / 2.0 {
        el = -PI - el;
        az += PI;
    }
    (wrap_angle(az), el)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Response of one receiver port to H and V polarized incidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortResponse {
    pub h: Complex64,
    pub v: Complex64,
}

/// Anything that maps a direction to per-port polarimetric gains.
pub trait Manifold: Send + Sync {
    fn port_count(&self) -> usize;

    fn port_responses(&self, dir: Direction) -> Result<Vec<PortResponse>>;
}

/// A dual-polarized sensor: two dipoles sharing a phase center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    /// Phase center in wavelengths.
    pub position: [f64; 3],
    /// One port per axis.
    pub axes: [[f64; 3]; 2],
}

/// Analytic ideal-dipole array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayModel {
    elements: Vec<Element>,
}

impl ArrayModel {
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidArray(
                "at least one element (two ports) is required".into(),
            ));
        }
        for (i, el) in elements.iter().enumerate() {
            if el.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArray(format!("element {i}: non-finite position")));
            }
            let [a, b] = &el.axes;
            let checks = [dot(a, a) - 1.0, dot(b, b) - 1.0, dot(a, b)];
            if checks.iter().any(|c| !(c.abs() <= ORTHONORMAL_TOL)) {
                return Err(Error::InvalidArray(format!(
                    "element {i}: dipole axes are not orthonormal"
                )));
            }
        }
        Ok(Self { elements })
    }

    /// Three x/z dipole pairs at (0,0,0), (0.5,0,0) and (0,0.5,0)
    /// wavelengths: six ports.
    pub fn dipole_triad() -> Self {
        let axes = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let elements = [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.5, 0.0]]
            .into_iter()
            .map(|position| Element { position, axes })
            .collect();
        Self { elements }
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }
}

impl Manifold for ArrayModel {
    fn port_count(&self) -> usize {
        2 * self.elements.len()
    }

    fn port_responses(&self, dir: Direction) -> Result<Vec<PortResponse>> {
        Ok(evaluate_pattern(self, dir))
    }
}

/// Per-port `(b_H, b_V)` of the analytic model.
pub fn evaluate_pattern(model: &ArrayModel, dir: Direction) -> Vec<PortResponse> {
    let k = dir.unit_vector();
    let e_theta = dir.e_theta();
    let e_phi = dir.e_phi();
    let mut out = Vec::with_capacity(model.port_count());
    for el in &model.elements {
        let rho = Complex64::from_polar(1.0, TAU * dot(&el.position, &k));
        for axis in &el.axes {
            out.push(PortResponse {
                h: rho * dot(axis, &e_phi),
                v: rho * dot(axis, &e_theta),
            });
        }
    }
    out
}

/// Steering matrix `B` of shape `M_R x 2P`.
pub fn build_steering_matrix<M: Manifold + ?Sized>(
    manifold: &M,
    directions: &[Direction],
) -> Result<CMatrix> {
    if directions.is_empty() {
        return Err(Error::InvalidParameters("at least one path is required".into()));
    }
    let ports = manifold.port_count();
    let mut b = CMatrix::zeros(ports, 2 * directions.len());
    for (p, dir) in directions.iter().enumerate() {
        let resp = manifold.port_responses(*dir)?;
        if resp.len() != ports {
            return Err(Error::Dimension(format!(
                "manifold returned {} ports, expected {ports}",
                resp.len()
            )));
        }
        for (m, r) in resp.iter().enumerate() {
            b[(m, 2 * p)] = r.h;
            b[(m, 2 * p + 1)] = r.v;
        }
    }
    Ok(b)
}

/// Sampled gains of one port, elevation-major (`index = el * n_az + az`).
#[derive(Debug, Clone, PartialEq)]
pub struct PortSamples {
    pub h: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

/// Pattern samples on a uniform azimuth/elevation grid (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGrid {
    azimuth: Vec<f64>,
    elevation: Vec<f64>,
    ports: Vec<PortSamples>,
    full_circle: bool,
}

fn check_axis(name: &str, axis: &[f64], min_len: usize) -> Result<f64> {
    if axis.len() < min_len {
        return Err(Error::InvalidGrid(format!(
            "{name} grid needs at least {min_len} nodes"
        )));
    }
    if axis.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidGrid(format!("{name} grid has non-finite nodes")));
    }
    if axis.len() == 1 {
        return Ok(0.0);
    }
    let step = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    for w in axis.windows(2) {
        let d = w[1] - w[0];
        if d <= 0.0 {
            return Err(Error::InvalidGrid(format!("{name} grid is not strictly increasing")));
        }
        if (d - step).abs() > 1e-9 * step.max(1.0) {
            return Err(Error::InvalidGrid(format!("{name} grid is not uniform")));
        }
    }
    Ok(step)
}

impl PatternGrid {
    pub fn new(azimuth: Vec<f64>, elevation: Vec<f64>, ports: Vec<PortSamples>) -> Result<Self> {
        let az_step = check_axis("azimuth", &azimuth, 2)?;
        check_axis("elevation", &elevation, 2)?;
        if ports.is_empty() {
            return Err(Error::InvalidGrid("no ports".into()));
        }
        let n = azimuth.len() * elevation.len();
        for (i, p) in ports.iter().enumerate() {
            if p.h.len() != n || p.v.len() != n {
                return Err(Error::InvalidGrid(format!(
                    "port {i}: expected {} x {} samples",
                    elevation.len(),
                    azimuth.len()
                )));
            }
        }
        let full_circle = (az_step * azimuth.len() as f64 - TAU).abs() < 1e-9;
        Ok(Self {
            azimuth,
            elevation,
            ports,
            full_circle,
        })
    }

    /// Samples any manifold on `n_az` azimuths covering the full circle from
    /// `-pi` and `n_el` elevations from `-pi/2` to `pi/2` inclusive.
    pub fn sample<M: Manifold + ?Sized>(manifold: &M, n_az: usize, n_el: usize) -> Result<Self> {
        if n_az < 2 || n_el < 2 {
            return Err(Error::InvalidGrid("need at least 2 x 2 nodes".into()));
        }
        let azimuth: Vec<f64> = (0..n_az).map(|i| -PI + TAU * i as f64 / n_az as f64).collect();
        let elevation: Vec<f64> = (0..n_el)
            .map(|j| -PI / 2.0 + PI * j as f64 / (n_el - 1) as f64)
            .collect();
        let mut ports = vec![
            PortSamples {
                h: Vec::with_capacity(n_az * n_el),
                v: Vec::with_capacity(n_az * n_el),
            };
            manifold.port_count()
        ];
        for &el in &elevation {
            for &az in &azimuth {
                let resp = manifold.port_responses(Direction::new(az, el)?)?;
                for (p, r) in ports.iter_mut().zip(resp) {
                    p.h.push(r.h);
                    p.v.push(r.v);
                }
            }
        }
        Self::new(azimuth, elevation, ports)
    }

    pub fn azimuth(&self) -> &[f64] {
        &self.azimuth
    }

    pub fn elevation(&self) -> &[f64] {
        &self.elevation
    }

    pub fn ports(&self) -> &[PortSamples] {
        &self.ports
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: PatternGridFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&PatternGridFile::from(self))?)
    }

    // (lower index, upper index, fraction) along azimuth.
    fn azimuth_cell(&self, az: f64) -> Result<(usize, usize, f64)> {
        let n = self.azimuth.len();
        let step = (self.azimuth[n - 1] - self.azimuth[0]) / (n - 1) as f64;
        if self.full_circle {
            let t = ((az - self.azimuth[0]) / step).rem_euclid(n as f64);
            let i0 = (t.floor() as usize).min(n - 1);
            return Ok((i0, (i0 + 1) % n, t - i0 as f64));
        }
        // Partial coverage: either the query maps into the hull after
        // wrapping or it is out of domain.
        let lo = self.azimuth[0];
        let hi = self.azimuth[n - 1];
        let mut a = az;
        if a < lo {
            a += TAU;
        }
        if a > hi {
            a -= TAU;
        }
        if a < lo || a > hi {
            return Err(Error::Domain(format!("azimuth {az} rad outside pattern grid")));
        }
        linear_cell(&self.azimuth, step, a)
    }

    fn elevation_cell(&self, el: f64) -> Result<(usize, usize, f64)> {
        let n = self.elevation.len();
        let lo = self.elevation[0];
        let hi = self.elevation[n - 1];
        if el < lo || el > hi {
            return Err(Error::Domain(format!("elevation {el} rad outside pattern grid")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        linear_cell(&self.elevation, step, el)
    }
}

fn linear_cell(axis: &[f64], step: f64, x: f64) -> Result<(usize, usize, f64)> {
    let n = axis.len();
    let t = (x - axis[0]) / step;
    let i0 = (t.floor().max(0.0) as usize).min(n - 2);
    Ok((i0, i0 + 1, (t - i0 as f64).clamp(0.0, 1.0)))
}

impl Manifold for PatternGrid {
    fn port_count(&self) -> usize {
        self.ports.len()
    }

    fn port_responses(&self, dir: Direction) -> Result<Vec<PortResponse>> {
        pattern_from_grid(self, dir)
    }
}

/// Bilinear interpolation of the sampled pattern; azimuth wraps when the grid
/// covers the full circle, elevation never does.
pub fn pattern_from_grid(grid: &PatternGrid, dir: Direction) -> Result<Vec<PortResponse>> {
    let (a0, a1, fa) = grid.azimuth_cell(dir.azimuth())?;
    let (e0, e1, fe) = grid.elevation_cell(dir.elevation())?;
    let n_az = grid.azimuth.len();
    let w = [
        (e0 * n_az + a0, (1.0 - fe) * (1.0 - fa)),
        (e0 * n_az + a1, (1.0 - fe) * fa),
        (e1 * n_az + a0, fe * (1.0 - fa)),
        (e1 * n_az + a1, fe * fa),
    ];
    Ok(grid
        .ports
        .iter()
        .map(|p| {
            let mut h = Complex64::new(0.0, 0.0);
            let mut v = Complex64::new(0.0, 0.0);
            for &(i, wt) in &w {
                h += p.h[i] * wt;
                v += p.v[i] * wt;
            }
            PortResponse { h, v }
        })
        .collect())
}

/// Either pattern source, selectable at run time.
#[derive(Debug, Clone)]
pub enum ArraySource {
    Analytic(ArrayModel),
    Grid(PatternGrid),
}

impl Manifold for ArraySource {
    fn port_count(&self) -> usize {
        match self {
            ArraySource::Analytic(m) => m.port_count(),
            ArraySource::Grid(g) => g.port_count(),
        }
    }

    fn port_responses(&self, dir: Direction) -> Result<Vec<PortResponse>> {
        match self {
            ArraySource::Analytic(m) => m.port_responses(dir),
            ArraySource::Grid(g) => g.port_responses(dir),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PortFile {
    #[serde(rename = "bH_re")]
    bh_re: Vec<Vec<f64>>,
    #[serde(rename = "bH_im")]
    bh_im: Vec<Vec<f64>>,
    #[serde(rename = "bV_re")]
    bv_re: Vec<Vec<f64>>,
    #[serde(rename = "bV_im")]
    bv_im: Vec<Vec<f64>>,
}

/// On-disk layout: angles in degrees, 2-D sample arrays indexed
/// `[elevation][azimuth]`.
#[derive(Debug, Serialize, Deserialize)]
struct PatternGridFile {
    azimuth_deg: Vec<f64>,
    elevation_deg: Vec<f64>,
    ports: Vec<PortFile>,
}

fn flatten(re: &[Vec<f64>], im: &[Vec<f64>], n_el: usize, n_az: usize) -> Result<Vec<Complex64>> {
    let shape_ok = |a: &[Vec<f64>]| a.len() == n_el && a.iter().all(|r| r.len() == n_az);
    if !shape_ok(re) || !shape_ok(im) {
        return Err(Error::InvalidGrid(format!(
            "sample arrays must be {n_el} x {n_az} (elevation x azimuth)"
        )));
    }
    Ok(re
        .iter()
        .flatten()
        .zip(im.iter().flatten())
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect())
}

impl TryFrom<PatternGridFile> for PatternGrid {
    type Error = Error;

    fn try_from(f: PatternGridFile) -> Result<Self> {
        let (n_el, n_az) = (f.elevation_deg.len(), f.azimuth_deg.len());
        let ports = f
            .ports
            .iter()
            .map(|p| {
                Ok(PortSamples {
                    h: flatten(&p.bh_re, &p.bh_im, n_el, n_az)?,
                    v: flatten(&p.bv_re, &p.bv_im, n_el, n_az)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PatternGrid::new(
            f.azimuth_deg.iter().map(|d| d.to_radians()).collect(),
            f.elevation_deg.iter().map(|d| d.to_radians()).collect(),
            ports,
        )
    }
}

impl From<&PatternGrid> for PatternGridFile {
    fn from(g: &PatternGrid) -> Self {
        let n_az = g.azimuth.len();
        let split = |s: &[Complex64], f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            s.chunks(n_az).map(|row| row.iter().map(f).collect()).collect()
        };
        PatternGridFile {
            azimuth_deg: g.azimuth.iter().map(|r| r.to_degrees()).collect(),
            elevation_deg: g.elevation.iter().map(|r| r.to_degrees()).collect(),
            ports: g
                .ports
                .iter()
                .map(|p| PortFile {
                    bh_re: split(&p.h, |c| c.re),
                    bh_im: split(&p.h, |c| c.im),
                    bv_re: split(&p.v, |c| c.re),
                    bv_im: split(&p.v, |c| c.im),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single(position: [f64; 3], axis: [f64; 3], other: [f64; 3]) -> ArrayModel {
        ArrayModel::new(vec![Element {
            position,
            axes: [axis, other],
        }])
        .unwrap()
    }

    const X: [f64; 3] = [1.0, 0.0, 0.0];
    const Y: [f64; 3] = [0.0, 1.0, 0.0];
    const Z: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn z_dipole_at_origin_is_pure_vertical() {
        let m = single([0.0; 3], Z, X);
        for az in [-3.0, -1.0, 0.0, 0.4, 2.9] {
            let r = evaluate_pattern(&m, Direction::new(az, 0.0).unwrap());
            assert_abs_diff_eq!(r[0].h.norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(r[0].v.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(r[0].v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn x_dipole_broadside_is_negative_horizontal() {
        let m = single([0.0; 3], X, Z);
        let r = evaluate_pattern(&m, Direction::new(PI / 2.0, 0.0).unwrap());
        assert_abs_diff_eq!(r[0].h.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].h.im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].v.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn half_wavelength_offset_flips_phase() {
        let m = single([0.5, 0.0, 0.0], Z, X);
        let r = evaluate_pattern(&m, Direction::new(0.0, 0.0).unwrap());
        assert_abs_diff_eq!(r[0].h.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].v.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn direction_domain() {
        assert!(Direction::new(0.0, 1.6).is_err());
        assert!(Direction::new(f64::NAN, 0.0).is_err());
        let d = Direction::new(3.0 * PI, 0.0).unwrap();
        assert_abs_diff_eq!(d.azimuth(), PI, epsilon = 1e-12);
        let d = Direction::new(-PI, 0.0).unwrap();
        assert_eq!(d.azimuth(), PI);
    }

    #[test]
    fn folding_preserves_unit_vector() {
        let d = Direction::folded(0.3, PI / 2.0 + 0.2).unwrap();
        let expect = [
            (PI / 2.0 + 0.2).cos() * 0.3f64.cos(),
            (PI / 2.0 + 0.2).cos() * 0.3f64.sin(),
            (PI / 2.0 + 0.2).sin(),
        ];
        for (a, b) in d.unit_vector().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_non_orthonormal_axes() {
        let bad = ArrayModel::new(vec![Element {
            position: [0.0; 3],
            axes: [X, [0.5, 0.5, 0.0]],
        }]);
        assert!(matches!(bad, Err(Error::InvalidArray(_))));
        assert!(ArrayModel::new(vec![]).is_err());
    }

    #[test]
    fn steering_matrix_layout() {
        // x and z dipole pair at the origin.
        let m = single([0.0; 3], X, Z);
        let d = Direction::new(0.0, 0.0).unwrap();
        let b = build_steering_matrix(&m, &[d]).unwrap();
        let r = evaluate_pattern(&m, d);
        assert_eq!(b.shape(), (2, 2));
        for (port, resp) in r.iter().enumerate() {
            assert_eq!(b[(port, 0)], resp.h);
            assert_eq!(b[(port, 1)], resp.v);
        }
    }

    #[test]
    fn steering_matrix_identical_paths_give_identical_columns() {
        let m = ArrayModel::dipole_triad();
        let d = Direction::from_degrees(40.0, 20.0).unwrap();
        let b = build_steering_matrix(&m, &[d, d]).unwrap();
        assert_eq!(b.columns(0, 2), b.columns(2, 2));
        assert!(build_steering_matrix(&m, &[]).is_err());
    }

    #[test]
    fn grid_interpolation_identity_and_midpoint() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        // 4 azimuths x 2 elevations; the first row ramps 0 -> 1 between nodes 0 and 1.
        let h = vec![zero, one, zero, zero, zero, one, zero, zero];
        let grid = PatternGrid::new(
            vec![-PI, -PI / 2.0, 0.0, PI / 2.0],
            vec![0.0, 0.5],
            vec![PortSamples { h: h.clone(), v: h }],
        )
        .unwrap();
        let on_node = pattern_from_grid(&grid, Direction::new(-PI / 2.0, 0.0).unwrap()).unwrap();
        assert_eq!(on_node[0].h, one);
        let mid = pattern_from_grid(&grid, Direction::new(-3.0 * PI / 4.0, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(mid[0].h.re, 0.5, epsilon = 1e-12);
        // Wraps between pi/2 and -pi (== pi).
        let wrapped = pattern_from_grid(&grid, Direction::new(PI, 0.25).unwrap()).unwrap();
        assert_abs_diff_eq!(wrapped[0].h.re, 0.0, epsilon = 1e-12);
        assert!(matches!(
            pattern_from_grid(&grid, Direction::new(0.0, 0.6).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        let z = Complex64::new(0.0, 0.0);
        let ports = vec![PortSamples { h: vec![z; 4], v: vec![z; 4] }];
        assert!(PatternGrid::new(vec![0.0, 0.0], vec![0.0, 1.0], ports.clone()).is_err());
        assert!(PatternGrid::new(vec![0.0, 1.0], vec![0.0, 1.0, 2.0], ports.clone()).is_err());
        assert!(PatternGrid::new(vec![0.0, 1.0, 3.0], vec![0.0, 1.0], ports).is_err());
    }

    fn max_grid_error(grid: &PatternGrid, model: &ArrayModel) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..37 {
            for j in 0..17 {
                let az = -PI + 0.1713 * i as f64 + 0.0037;
                let el = -1.4 + 0.1719 * j as f64 + 0.0011;
                let d = Direction::new(az, el).unwrap();
                let a = evaluate_pattern(model, d);
                let g = pattern_from_grid(grid, d).unwrap();
                for (x, y) in a.iter().zip(&g) {
                    worst = worst.max((x.h - y.h).norm()).max((x.v - y.v).norm());
                }
            }
        }
        worst
    }

    #[test]
    fn grid_converges_to_analytic_pattern() {
        let model = ArrayModel::dipole_triad();
        let coarse = PatternGrid::sample(&model, 360, 181).unwrap();
        let fine = PatternGrid::sample(&model, 1440, 721).unwrap();
        let e_coarse = max_grid_error(&coarse, &model);
        let e_fine = max_grid_error(&fine, &model);
        assert!(e_coarse < 1e-3, "1 deg grid error {e_coarse}");
        assert!(e_fine < e_coarse);
    }

    #[test]
    fn grid_json_round_trip() {
        let model = ArrayModel::dipole_triad();
        let grid = PatternGrid::sample(&model, 12, 7).unwrap();
        let text = grid.to_json_string().unwrap();
        let back = PatternGrid::from_json_str(&text).unwrap();
        assert_eq!(back.port_count(), 6);
        for (a, b) in back.azimuth().iter().zip(grid.azimuth()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
        let d = Direction::from_degrees(10.0, 20.0).unwrap();
        let x = pattern_from_grid(&grid, d).unwrap();
        let y = pattern_from_grid(&back, d).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert_abs_diff_eq!((p.h - q.h).norm(), 0.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn element_phase_has_unit_modulus(
            az in -PI..PI, el in -PI / 2.0..PI / 2.0,
            x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64,
        ) {
            // A dipole along y projects onto both unit vectors; rho alone is
            // checked through |b|^2 = |d.e_phi|^2 + |d.e_theta|^2 for the y axis.
            let m = single([x, y, z], Y, Z);
            let d = Direction::new(az, el).unwrap();
            let r = evaluate_pattern(&m, d);
            let ey = d.e_phi()[1].powi(2) + d.e_theta()[1].powi(2);
            prop_assert!((r[0].h.norm_sqr() + r[0].v.norm_sqr() - ey).abs() < 1e-12);
            // z dipole: H is exactly zero and |V| = |cos el|.
            prop_assert!(r[1].h.norm() < 1e-15);
            prop_assert!((r[1].v.norm() - el.cos().abs()).abs() < 1e-12);
        }

        #[test]
        fn steering_matrix_is_concatenated_patterns(
            az0 in -PI..PI, el0 in -1.5..1.5f64, az1 in -PI..PI, el1 in -1.5..1.5f64,
        ) {
            let m = ArrayModel::dipole_triad();
            let dirs = [Direction::new(az0, el0).unwrap(), Direction::new(az1, el1).unwrap()];
            let b = build_steering_matrix(&m, &dirs).unwrap();
            prop_assert_eq!(b.ncols(), 4);
            for (p, d) in dirs.iter().enumerate() {
                for (port, r) in evaluate_pattern(&m, *d).iter().enumerate() {
                    prop_assert_eq!(b[(port, 2 * p)], r.h);
                    prop_assert_eq!(b[(port, 2 * p + 1)], r.v);
                }
            }
            prop_assert!(b.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        }
    }
}
