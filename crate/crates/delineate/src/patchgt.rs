//! Patch-level ground truth: which border points get a Gaussian peak.
//!
//! Three configurations exist. *non-connectivity* keeps every intersection of
//! the network with the clip square; *connectivity* keeps only intersections
//! reachable from the patch center inside the square; *connectivity-av*
//! additionally restricts the path to the center's vessel class.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::netgraph::{
    clip_to_window, default_square_side, BorderPoint, ClassLabel, NetworkGraph, PatchConnectivity,
    PatchWindow,
};
use crate::pgm;

/// Ground-truth configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtMode {
    NonConnectivity,
    Connectivity,
    ConnectivityAv,
}

impl fmt::Display for GtMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GtMode::NonConnectivity => "non-connectivity",
            GtMode::Connectivity => "connectivity",
            GtMode::ConnectivityAv => "connectivity-av",
        };
        f.write_str(s)
    }
}

impl FromStr for GtMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non-connectivity" | "non_connectivity" => Ok(GtMode::NonConnectivity),
            "connectivity" => Ok(GtMode::Connectivity),
            "connectivity-av" | "connectivity_av" => Ok(GtMode::ConnectivityAv),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// Square scalar grid in `[0, 1]`, one value per pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub side: u32,
    values: Vec<f32>,
}

impl Heatmap {
    pub fn zero(side: u32) -> Self {
        Heatmap {
            side,
            values: vec![0.0; side as usize * side as usize],
        }
    }

    pub fn from_values(side: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != side as usize * side as usize {
            return Err(Error::InvalidParameter(format!(
                "heatmap needs {}x{} values",
                side, side
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidParameter(
                "heatmap values must be finite and in [0, 1]".into(),
            ));
        }
        Ok(Heatmap { side, values })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.side as usize + x as usize]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Write as P5, maxval 65535, big-endian, `sample = round(65535 * v)`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let samples: Vec<u16> = self.values.iter().map(|&v| pgm::quantize16(v)).collect();
        pgm::write_graymap(path, self.side, self.side, 65535, &samples)
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let g = pgm::parse_graymap(bytes)?;
        if g.width != g.height {
            return Err(Error::Graymap(format!(
                "heatmap must be square, got {}x{}",
                g.width, g.height
            )));
        }
        Ok(Heatmap {
            side: g.width,
            values: g.normalized(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_pgm_bytes(&bytes)
    }
}

/// Border points that receive a ground-truth peak under `mode`.
pub fn gt_points(
    graph: &NetworkGraph,
    window: &PatchWindow,
    mode: GtMode,
) -> Result<Vec<BorderPoint>> {
    gt_points_for_class(graph, window, mode, None)
}

/// As [`gt_points`], optionally pinning the class the center must belong to
/// (used by class-constrained tracing). With a pinned class the center snaps
/// only to polylines of that class.
pub fn gt_points_for_class(
    graph: &NetworkGraph,
    window: &PatchWindow,
    mode: GtMode,
    class: Option<ClassLabel>,
) -> Result<Vec<BorderPoint>> {
    if mode == GtMode::ConnectivityAv {
        if let Some(bad) = graph
            .edges
            .iter()
            .map(|e| e.label)
            .find(|l| !l.is_vessel())
        {
            return Err(Error::ClassLabelMismatch {
                found: bad.to_string(),
            });
        }
    }
    let clipped = clip_to_window(graph, window)?;
    let filtered = |same_class: bool| -> Vec<BorderPoint> {
        let Some(loc) = clipped.locate_center_for_class(class) else {
            return Vec::new();
        };
        clipped
            .border_points
            .iter()
            .filter(|bp| {
                clipped.connected_from(&loc, bp, same_class) == PatchConnectivity::Connected
            })
            .copied()
            .collect()
    };
    let points = match mode {
        GtMode::NonConnectivity => match class {
            None => clipped.border_points.clone(),
            Some(c) => clipped
                .border_points
                .iter()
                .filter(|bp| bp.label == c)
                .copied()
                .collect(),
        },
        GtMode::Connectivity => filtered(false),
        GtMode::ConnectivityAv => filtered(true),
    };
    Ok(points)
}

/// Render peaks as a clamped sum of unit Gaussians evaluated at pixel
/// centers: `clamp(sum_i exp(-((x-x_i)^2 + (y-y_i)^2) / (2 sigma^2)), 0, 1)`.
///
/// `points` are window-local positions and may be sub-pixel. Points are
/// sorted internally so the result is exactly permutation-invariant.
pub fn make_gt_heatmap(points: &[Point], patch_size: u32, sigma: f64) -> Result<Heatmap> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let side = patch_size;
    let limit = side as f64 - 1.0;
    for p in points {
        if !(0.0..=limit).contains(&p.x) || !(0.0..=limit).contains(&p.y) {
            return Err(Error::InvalidParameter(format!(
                "peak ({}, {}) outside patch of side {side}",
                p.x, p.y
            )));
        }
    }
    let mut sorted: Vec<Point> = points.to_vec();
    sorted.sort_by(|a, b| (a.y, a.x).partial_cmp(&(b.y, b.x)).expect("finite"));

    let n = side as usize;
    let mut acc = vec![0.0_f64; n * n];
    let inv = 1.0 / (2.0 * sigma * sigma);
    for p in &sorted {
        for y in 0..n {
            let dy = y as f64 - p.y;
            for x in 0..n {
                let dx = x as f64 - p.x;
                acc[y * n + x] += (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
    let values = acc.iter().map(|&v| v.min(1.0) as f32).collect();
    Ok(Heatmap { side, values })
}

/// `n` windows centered on uniformly chosen vertices (with replacement) whose
/// windows fit inside the image. Deterministic for a fixed seed.
pub fn sample_training_patches(
    graph: &NetworkGraph,
    n: usize,
    patch_size: u32,
    rng_seed: u64,
) -> Result<Vec<PatchWindow>> {
    let square = default_square_side(patch_size);
    let eligible: Vec<PatchWindow> = graph
        .vertices
        .iter()
        .filter_map(|v| {
            let w = PatchWindow::new(v.pos(), patch_size, square).ok()?;
            w.fits(graph.width, graph.height).then_some(w)
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleVertex { patch_size });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok((0..n)
        .map(|_| eligible[rng.gen_range(0..eligible.len())])
        .collect())
}
