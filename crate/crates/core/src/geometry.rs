//! Static geometry of pipes and of the soil layers around a supply/return
//! pipe pair.
//!
//! Each pipe is wrapped in `n_s` concentric soil layers. Once a layer's
//! outer radius exceeds the half spacing `r_b` it overlaps the mirrored
//! layer of the partner pipe. The overlap is cut along the chord at
//! distance `r_b` from the pipe center. Each layer is split into an outer
//! region (the sector facing away from the partner pipe) and an adjacent
//! region (the wedge of angle β facing it, minus the overlapping circular
//! segment).

use std::f64::consts::PI;

use crate::error::ParamError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeGeometry {
    pub inner_radius: f64,
    pub wall_thickness: f64,
    pub length: f64,
}

impl PipeGeometry {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.inner_radius > 0.0) {
            return Err(ParamError::new("inner_radius", "must be > 0"));
        }
        if !(self.wall_thickness > 0.0) {
            return Err(ParamError::new("wall_thickness", "must be > 0"));
        }
        if !(self.length > 0.0) {
            return Err(ParamError::new("length", "must be > 0"));
        }
        Ok(())
    }

    pub fn outer_radius(&self) -> f64 {
        self.inner_radius + self.wall_thickness
    }
}

/// Areas, volumes and masses of one pipe volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeVolumes {
    pub fluid_area: f64,
    pub fluid_volume: f64,
    pub fluid_mass: f64,
    pub wall_area: f64,
    pub wall_volume: f64,
    pub wall_mass: f64,
}

pub fn pipe_geometry(g: &PipeGeometry, fluid_density: f64, wall_density: f64) -> PipeVolumes {
    let r = g.inner_radius;
    let fluid_area = PI * r * r;
    let fluid_volume = fluid_area * g.length;
    let ro = r + g.wall_thickness;
    let wall_volume = PI * (ro * ro - r * r) * g.length;
    PipeVolumes {
        fluid_area,
        fluid_volume,
        fluid_mass: fluid_density * fluid_volume,
        wall_area: 2.0 * PI * r * g.length,
        wall_volume,
        wall_mass: wall_density * wall_volume,
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Chord length of a circle of radius `r` cut at segment height `z`.
pub fn chord_length(r: f64, z: f64) -> f64 {
    2.0 * (2.0 * r * z - z * z).max(0.0).sqrt()
}

/// Area of the circular segment of height `z` in a circle of radius `r`.
pub fn lens_area(r: f64, z: f64) -> f64 {
    if r <= 0.0 || z <= 0.0 {
        return 0.0;
    }
    let chord = chord_length(r, z);
    r * r * clamp_unit(chord / (2.0 * r)).asin() - chord * (r - z) / 2.0
}

/// Central angle (radians) subtended by a chord of length `chord`.
pub fn segment_angle(chord: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    2.0 * clamp_unit(chord / (2.0 * r)).asin()
}

/// Discretized soil around one pipe of a supply/return pair.
///
/// Radius-like arrays (`radius`, `segment_height`, `chord`, `arc`, `lens`)
/// have `n_s + 1` entries for boundaries `0..=n_s`; per-layer arrays have
/// `n_s` entries for layers `1..=n_s` stored at index `layer - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilLayerProfile {
    pub layers: usize,
    pub layer_thickness: f64,
    pub half_spacing: f64,
    pub length: f64,
    /// Pipe outer radius `r_p + δ_p`.
    pub pipe_outer_radius: f64,
    pub radius: Vec<f64>,
    pub segment_height: Vec<f64>,
    pub chord: Vec<f64>,
    pub arc: Vec<f64>,
    pub lens: Vec<f64>,
    /// Wedge angle of the adjacent region in radians, from the outermost layer.
    pub beta: f64,
    pub area_outer: Vec<f64>,
    pub area_adjacent: Vec<f64>,
    pub area_hollow: Vec<f64>,
    pub k_outer: Vec<f64>,
    pub k_adjacent: Vec<f64>,
    pub volume_outer: Vec<f64>,
    pub volume_adjacent: Vec<f64>,
}

impl SoilLayerProfile {
    pub fn beta_degrees(&self) -> f64 {
        self.beta.to_degrees()
    }

    /// Fraction of a full turn covered by the outer region.
    pub fn outer_fraction(&self) -> f64 {
        (2.0 * PI - self.beta) / (2.0 * PI)
    }

    /// Whether the adjacent region of `layer` (1-based) has zero area.
    pub fn adjacent_is_empty(&self, layer: usize) -> bool {
        self.area_adjacent[layer - 1] <= 0.0
    }
}

pub fn soil_layer_profile(
    g: &PipeGeometry,
    layers: usize,
    layer_thickness: f64,
    half_spacing: f64,
) -> Result<SoilLayerProfile, ParamError> {
    g.validate()?;
    if layers == 0 {
        return Err(ParamError::new("layers", "must be >= 1"));
    }
    if !(layer_thickness > 0.0) {
        return Err(ParamError::new("layer_thickness", "must be > 0"));
    }
    if !(half_spacing > 0.0) {
        return Err(ParamError::new("half_spacing", "must be > 0"));
    }
    let r0 = g.outer_radius();
    if half_spacing <= r0 {
        return Err(ParamError::new(
            "half_spacing",
            format!("must exceed the pipe outer radius {r0} m (pipes would overlap)"),
        ));
    }

    let radius: Vec<f64> = (0..=layers)
        .map(|i| r0 + i as f64 * layer_thickness)
        .collect();
    let segment_height: Vec<f64> = radius
        .iter()
        .map(|&r| (r - half_spacing).max(0.0))
        .collect();
    let chord: Vec<f64> = radius
        .iter()
        .zip(&segment_height)
        .map(|(&r, &z)| chord_length(r, z))
        .collect();
    let arc: Vec<f64> = radius
        .iter()
        .zip(&chord)
        .map(|(&r, &c)| r * segment_angle(c, r))
        .collect();
    let lens: Vec<f64> = radius
        .iter()
        .zip(&segment_height)
        .map(|(&r, &z)| lens_area(r, z))
        .collect();
    let beta = segment_angle(chord[layers], radius[layers]);

    let sector = beta / (2.0 * PI);
    let mut area_outer = Vec::with_capacity(layers);
    let mut area_adjacent = Vec::with_capacity(layers);
    let mut area_hollow = Vec::with_capacity(layers);
    for i in 1..=layers {
        let (ri, rm) = (radius[i], radius[i - 1]);
        let hollow = PI * (ri * ri - rm * rm);
        area_hollow.push(hollow);
        area_outer.push(hollow * (1.0 - sector));
        let adj = (PI * ri * ri * sector - lens[i]) - (PI * rm * rm * sector - lens[i - 1]);
        area_adjacent.push(adj.max(0.0));
    }
    let k_outer: Vec<f64> = area_outer
        .iter()
        .zip(&area_hollow)
        .map(|(a, h)| a / h)
        .collect();
    let k_adjacent: Vec<f64> = area_adjacent
        .iter()
        .zip(&area_hollow)
        .map(|(a, h)| a / h)
        .collect();
    let volume_outer = area_outer.iter().map(|a| a * g.length).collect();
    let volume_adjacent = area_adjacent.iter().map(|a| a * g.length).collect();

    Ok(SoilLayerProfile {
        layers,
        layer_thickness,
        half_spacing,
        length: g.length,
        pipe_outer_radius: r0,
        radius,
        segment_height,
        chord,
        arc,
        lens,
        beta,
        area_outer,
        area_adjacent,
        area_hollow,
        k_outer,
        k_adjacent,
        volume_outer,
        volume_adjacent,
    })
}
