//! Rotation algebra on the Bloch sphere for a single light-shift class.
//!
//! Axis 1 is the resonant drive axis, axis 3 the population axis. A vector
//! with `s3 = +1` has every atom in the upper clock state `|4>`, `s3 = -1`
//! every atom in `|3>`. All matrices here are proper rotations and compose by
//! ordinary matrix multiplication with the rightmost factor acting first.

use std::ops::Mul;

/// Below this generalized rotation angle the combined matrix switches to a
/// series expansion of its `sin`/`cos` ratios.
const SMALL_ANGLE: f64 = 1e-8;

/// Ensemble pseudo-spin `(s1, s2, s3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl BlochVector {
    /// All atoms in the lower clock state `|3>`.
    pub const GROUND: Self = Self::new(0.0, 0.0, -1.0);
    /// All atoms in the upper clock state `|4>`.
    pub const EXCITED: Self = Self::new(0.0, 0.0, 1.0);

    pub const fn new(s1: f64, s2: f64, s3: f64) -> Self {
        Self { s1, s2, s3 }
    }

    pub fn norm(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }

    /// Fraction of atoms in `|4>`, `(1 + s3) / 2`.
    pub fn population_p4(&self) -> f64 {
        0.5 * (1.0 + self.s3)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.s1 - other.s1)
            .abs()
            .max((self.s2 - other.s2).abs())
            .max((self.s3 - other.s3).abs())
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// A 3x3 real orthogonal matrix with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3 {
    m: [[f64; 3]; 3],
}

impl Default for Rotation3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation3 {
    pub const IDENTITY: Self = Self {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Wraps a matrix without checking orthogonality.
    ///
    /// Callers are expected to pass a rotation; use [`Rotation3::orthogonality_error`]
    /// and [`Rotation3::determinant`] to verify when the source is untrusted.
    pub const fn from_matrix_unchecked(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    /// Rotation about axis 1 as written in the drive matrix:
    /// `[[1,0,0],[0,c,s],[0,-s,c]]`.
    pub fn about_axis1(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]],
        }
    }

    /// Rotation about axis 3 as written in the light-shift matrix:
    /// `[[c,s,0],[-s,c,0],[0,0,1]]`.
    pub fn about_axis3(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// `self * first`: `first` acts, then `self`.
    pub fn compose(&self, first: &Rotation3) -> Rotation3 {
        let a = &self.m;
        let b = &first.m;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Rotation3 { m: out }
    }

    pub fn apply(&self, s: &BlochVector) -> BlochVector {
        let m = &self.m;
        BlochVector {
            s1: m[0][0] * s.s1 + m[0][1] * s.s2 + m[0][2] * s.s3,
            s2: m[1][0] * s.s1 + m[1][1] * s.s2 + m[1][2] * s.s3,
            s3: m[2][0] * s.s1 + m[2][1] * s.s2 + m[2][2] * s.s3,
        }
    }

    pub fn transpose(&self) -> Rotation3 {
        let m = &self.m;
        Rotation3 {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    /// Inverse rotation (the transpose).
    pub fn inverse(&self) -> Rotation3 {
        self.transpose()
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of `|m^T m - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.transpose().compose(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram.m[i][j] - target).abs());
            }
        }
        worst
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &Rotation3) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;

    fn mul(self, rhs: Rotation3) -> Rotation3 {
        self.compose(&rhs)
    }
}

impl Mul<BlochVector> for Rotation3 {
    type Output = BlochVector;

    fn mul(self, rhs: BlochVector) -> BlochVector {
        self.apply(&rhs)
    }
}

/// Resonant drive of Rabi frequency `rabi_frequency` (rad/s) for `duration` (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub rabi_frequency: f64,
    pub duration: f64,
}

impl DriveParams {
    pub fn new(rabi_frequency: f64, duration: f64) -> Self {
        Self {
            rabi_frequency,
            duration,
        }
    }

    pub fn angle(&self) -> f64 {
        self.rabi_frequency * self.duration
    }
}

/// Differential shift `chi` (rad/s, any sign) acting for `duration` (s).
///
/// Also describes free evolution at an angular detuning `chi` from resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftParams {
    pub chi: f64,
    pub duration: f64,
}

impl ShiftParams {
    pub fn new(chi: f64, duration: f64) -> Self {
        Self { chi, duration }
    }

    pub fn angle(&self) -> f64 {
        self.chi * self.duration
    }
}

pub fn drive_rotation(p: DriveParams) -> Rotation3 {
    debug_assert!(p.duration >= 0.0 && p.rabi_frequency >= 0.0);
    Rotation3::about_axis1(p.angle())
}

pub fn shift_rotation(p: ShiftParams) -> Rotation3 {
    debug_assert!(p.duration >= 0.0);
    Rotation3::about_axis3(p.angle())
}

/// Evolution under simultaneous drive `omega` and shift `chi` for time `t`.
///
/// This is a rotation by `sqrt(omega^2 + chi^2) * t` about the axis
/// `(omega, 0, chi)`. `omega = chi = 0` gives the identity.
pub fn combined_rotation(omega: f64, chi: f64, t: f64) -> Rotation3 {
    let w = omega.hypot(chi);
    let x = w * t;
    // f1 = sin(wt)/w, f2 = (1 - cos(wt))/w^2
    let (f1, f2, cos_wt) = if x.abs() < SMALL_ANGLE {
        let x2 = x * x;
        (
            t * (1.0 - x2 / 6.0),
            0.5 * t * t * (1.0 - x2 / 12.0),
            1.0 - 0.5 * x2,
        )
    } else {
        let half = (0.5 * x).sin();
        (x.sin() / w, 2.0 * half * half / (w * w), x.cos())
    };

    Rotation3 {
        m: [
            [1.0 - chi * chi * f2, chi * f1, omega * chi * f2],
            [-chi * f1, cos_wt, omega * f1],
            [omega * chi * f2, -omega * f1, 1.0 - omega * omega * f2],
        ],
    }
}

/// `a * b`; `b` acts first.
pub fn compose(a: &Rotation3, b: &Rotation3) -> Rotation3 {
    a.compose(b)
}

pub fn apply(r: &Rotation3, s: &BlochVector) -> BlochVector {
    r.apply(s)
}
