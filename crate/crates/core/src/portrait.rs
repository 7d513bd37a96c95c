//! Phase portraits of the continuous-time flow `ẏ = (A − I)·y` on a 2-D map,
//! integrated with classical fixed-step RK4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ExpectationMap;

/// Square lattice of initial conditions on `[-extent, extent]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub per_side: usize,
    pub extent: f64,
}

impl Grid {
    pub fn unit(per_side: usize) -> Self {
        Self { per_side, extent: 1.0 }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let n = self.per_side;
        let coord = |k: usize| {
            if n == 1 {
                0.0
            } else {
                -self.extent + 2.0 * self.extent * k as f64 / (n - 1) as f64
            }
        };
        (0..n).flat_map(|a| (0..n).map(move |b| [coord(a), coord(b)])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitPoint {
    pub t: f64,
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitTrajectory {
    pub id: usize,
    pub points: Vec<PortraitPoint>,
}

impl PortraitTrajectory {
    pub fn start(&self) -> [f64; 2] {
        self.points[0].y
    }

    pub fn end(&self) -> [f64; 2] {
        self.points.last().expect("non-empty").y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    pub map: ExpectationMap,
    pub duration: f64,
    pub step: f64,
    pub trajectories: Vec<PortraitTrajectory>,
}

/// Options for the integrator. `record_every` thins the emitted polyline;
/// the start and end points are always kept.
#[derive(Debug, Clone, Copy)]
pub struct PortraitOptions {
    pub duration: f64,
    pub step: f64,
    pub record_every: usize,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self { duration: 30.0, step: 0.01, record_every: 10 }
    }
}

pub fn phase_portrait(map: &ExpectationMap, grid: &Grid, opts: PortraitOptions) -> Result<Portrait> {
    let starts = grid.points();
    portrait_from(map, &starts, opts)
}

/// Portrait from explicit initial conditions.
pub fn portrait_from(map: &ExpectationMap, starts: &[[f64; 2]], opts: PortraitOptions) -> Result<Portrait> {
    if map.dimension != 2 {
        return Err(Error::InvalidArgument(format!(
            "phase portraits need a 2-dimensional map, got {}",
            map.dimension
        )));
    }
    if !(opts.step.is_finite() && opts.step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {}", opts.step)));
    }
    if !(opts.duration.is_finite() && opts.duration >= 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be non-negative, got {}", opts.duration)));
    }
    let steps = (opts.duration / opts.step).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { opts.duration / steps as f64 };
    let every = opts.record_every.max(1);

    // Generator of the flow.
    let g = [
        [map.get(0, 0) - 1.0, map.get(0, 1)],
        [map.get(1, 0), map.get(1, 1) - 1.0],
    ];
    let f = |y: [f64; 2]| [g[0][0] * y[0] + g[0][1] * y[1], g[1][0] * y[0] + g[1][1] * y[1]];
    let axpy = |y: [f64; 2], a: f64, k: [f64; 2]| [y[0] + a * k[0], y[1] + a * k[1]];

    let trajectories = starts
        .iter()
        .enumerate()
        .map(|(id, &y0)| {
            let mut points = vec![PortraitPoint { t: 0.0, y: y0 }];
            let mut y = y0;
            for s in 1..=steps {
                let k1 = f(y);
                let k2 = f(axpy(y, h / 2.0, k1));
                let k3 = f(axpy(y, h / 2.0, k2));
                let k4 = f(axpy(y, h, k3));
                y = [
                    y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                    y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                ];
                if s % every == 0 || s == steps {
                    points.push(PortraitPoint { t: s as f64 * h, y });
                }
            }
            PortraitTrajectory { id, points }
        })
        .collect();

    Ok(Portrait { map: map.clone(), duration: opts.duration, step: h, trajectories })
}
