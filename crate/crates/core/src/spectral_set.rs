//! Symbolic spectral regions and the exact set algebra connecting
//! generator spectra to semigroup spectra.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Geometric region of the complex plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Empty,
    /// `{ Re z <= re_max }`.
    HalfPlane {
        re_max: f64,
    },
    /// `{ |z| <= radius }`, optionally with the origin removed.
    Disk {
        radius: f64,
        includes_zero: bool,
    },
    /// `{ r_min <= |z| <= r_max }`; a circle when the radii agree.
    Annulus {
        r_min: f64,
        r_max: f64,
    },
    /// Finite set of points, stored as `(re, im)` pairs.
    Discrete {
        points: Vec<(f64, f64)>,
    },
    /// `{ a + i k s : a in reals, k integer }`.
    VerticalLines {
        reals: Vec<f64>,
        im_spacing: f64,
    },
    Union {
        members: Vec<Region>,
    },
}

impl Region {
    pub fn circle(radius: f64) -> Region {
        Region::Annulus {
            r_min: radius,
            r_max: radius,
        }
    }

    pub fn unit_circle() -> Region {
        Region::circle(1.0)
    }

    pub fn discrete_from(points: impl IntoIterator<Item = Complex64>) -> Region {
        Region::Discrete {
            points: points.into_iter().map(|z| (z.re, z.im)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::Empty => true,
            Region::Discrete { points } => points.is_empty(),
            Region::Union { members } => members.iter().all(Region::is_empty),
            _ => false,
        }
    }

    /// Membership up to the numerical tolerance `tol`; boundaries belong
    /// to the set.
    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        match self {
            Region::Empty => false,
            Region::HalfPlane { re_max } => z.re <= re_max + tol,
            Region::Disk {
                radius,
                includes_zero,
            } => {
                let r = z.norm();
                if r <= tol && !includes_zero {
                    return false;
                }
                r <= radius + tol
            }
            Region::Annulus { r_min, r_max } => {
                let r = z.norm();
                r >= r_min - tol && r <= r_max + tol
            }
            Region::Discrete { points } => points
                .iter()
                .any(|(re, im)| (z - Complex64::new(*re, *im)).norm() <= tol),
            Region::VerticalLines { reals, im_spacing } => {
                if !reals.iter().any(|a| (z.re - a).abs() <= tol) {
                    return false;
                }
                if *im_spacing == 0.0 {
                    return z.im.abs() <= tol;
                }
                let k = (z.im / im_spacing).round();
                (z.im - k * im_spacing).abs() <= tol
            }
            Region::Union { members } => members.iter().any(|m| m.contains(z, tol)),
        }
    }

    /// Image under `z -> exp(t z)`, where exact set algebra exists:
    /// a half-plane maps to a punctured disk, finite sets map pointwise.
    /// Regions without a finite exact image return `None`.
    pub fn exp_map(&self, t: f64) -> Option<Region> {
        match self {
            Region::Empty => Some(Region::Empty),
            Region::HalfPlane { re_max } => Some(Region::Disk {
                radius: (re_max * t).exp(),
                includes_zero: false,
            }),
            Region::Discrete { points } => Some(Region::Discrete {
                points: points
                    .iter()
                    .map(|(re, im)| {
                        let w = (Complex64::new(*re, *im) * t).exp();
                        (w.re, w.im)
                    })
                    .collect(),
            }),
            Region::Union { members } => {
                let mapped: Option<Vec<Region>> = members.iter().map(|m| m.exp_map(t)).collect();
                Some(Region::Union { members: mapped? })
            }
            _ => None,
        }
    }
}

/// Inputs to the annular hull: real spectrum as sampled points or as an
/// interval of real parts.
#[derive(Debug, Clone, PartialEq)]
pub enum RealSet {
    Points(Vec<f64>),
    Interval { lo: f64, hi: f64 },
}

/// Rotational closure `T . exp(t . reals)`: one circle per real part, an
/// annulus when the real parts form an interval. Multiplying candidate
/// spectrum points by unit-modulus factors before extracting real parts
/// leaves the output unchanged by construction.
pub fn annular_hull(reals: &RealSet, t: f64) -> Region {
    match reals {
        RealSet::Points(values) => {
            let mut radii: Vec<f64> = values.iter().map(|a| (a * t).exp()).collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
            let circles: Vec<Region> = radii.into_iter().map(Region::circle).collect();
            match circles.len() {
                0 => Region::Empty,
                1 => circles.into_iter().next().unwrap(),
                _ => Region::Union { members: circles },
            }
        }
        RealSet::Interval { lo, hi } => {
            let (a, b) = ((lo * t).exp(), (hi * t).exp());
            Region::Annulus {
                r_min: a.min(b),
                r_max: a.max(b),
            }
        }
    }
}

/// A region together with the computation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSet {
    pub region: Region,
    pub provenance: String,
}

impl SpectralSet {
    pub fn new(region: Region, provenance: impl Into<String>) -> Self {
        SpectralSet {
            region,
            provenance: provenance.into(),
        }
    }
}
