//! Geometric channel generation, cascaded channel and power measurements.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bdris::{BdRisConfig, ScatteringMatrix, TrpVector, C64};
use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Which hop a path loss applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    BsUser,
    BsRis,
    RisUser,
}

/// Distance-dependent path loss in dB: `33 + 37 log10(d)` for the direct
/// link, `30 + 20 log10(d)` for both RIS hops.
pub fn path_loss_db(link: Link, distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::invalid(format!("distance must be positive, got {distance_m}")));
    }
    Ok(match link {
        Link::BsUser => 33.0 + 37.0 * distance_m.log10(),
        Link::BsRis | Link::RisUser => 30.0 + 20.0 * distance_m.log10(),
    })
}

/// Small-scale fading of the BS-RIS and RIS-user hops. The BS-user hop is
/// always Rayleigh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// Deterministic planar-wave steering vectors from the array geometry.
    #[default]
    LineOfSight,
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub ris_fading: FadingModel,
    pub tx_power_w: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            ris_fading: FadingModel::LineOfSight,
            tx_power_w: dbm_to_watts(30.0),
        }
    }
}

/// Deployment geometry. The RIS is a UPA in the y-z plane anchored at
/// `ris_position`; users are placed uniformly in the horizontal rectangle
/// spanned by the two `user_area` corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub bs_position: [f64; 3],
    pub ris_position: [f64; 3],
    pub user_area: [[f64; 3]; 2],
    /// `(N_y, N_z)`.
    pub upa_dims: (usize, usize),
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
}

impl SceneGeometry {
    /// BS at (50, -200, 20), RIS at (-2, -1, 0), users in the 10 m square
    /// at the origin, half-wavelength spacing.
    pub fn reference(upa_dims: (usize, usize)) -> Self {
        Self {
            bs_position: [50.0, -200.0, 20.0],
            ris_position: [-2.0, -1.0, 0.0],
            user_area: [[0.0, 0.0, 0.0], [10.0, 10.0, 0.0]],
            upa_dims,
            element_spacing: 0.5,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.upa_dims.0 * self.upa_dims.1
    }

    pub fn validate(&self, config: &BdRisConfig) -> Result<()> {
        if self.n_elements() != config.n_elements() {
            return Err(Error::invalid(format!(
                "UPA {}x{} has {} elements but the BD-RIS has {}",
                self.upa_dims.0,
                self.upa_dims.1,
                self.n_elements(),
                config.n_elements()
            )));
        }
        let [a, b] = self.user_area;
        if !((a[0] - b[0]).abs() > 0.0 && (a[1] - b[1]).abs() > 0.0) || a[2] != b[2] {
            return Err(Error::invalid("user area must be a non-degenerate horizontal rectangle"));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::invalid("element spacing must be positive"));
        }
        let finite = self
            .bs_position
            .iter()
            .chain(&self.ris_position)
            .chain(a.iter())
            .chain(b.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("scene coordinates must be finite"));
        }
        Ok(())
    }

    pub fn sample_user<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        let [a, b] = self.user_area;
        let x = a[0] + (b[0] - a[0]) * rng.random::<f64>();
        let y = a[1] + (b[1] - a[1]) * rng.random::<f64>();
        [x, y, a[2]]
    }

    /// Unit-modulus UPA response toward `point`. Element `iy + N_y * iz`
    /// sits at `(0, iy, iz) * spacing` wavelengths from the anchor.
    pub fn steering_vector(&self, point: [f64; 3]) -> Vec<C64> {
        let d = sub(point, self.ris_position);
        let r = norm(d);
        let (uy, uz) = (d[1] / r, d[2] / r);
        let (ny, nz) = self.upa_dims;
        let mut out = Vec::with_capacity(ny * nz);
        for iz in 0..nz {
            for iy in 0..ny {
                let phase = 2.0 * PI * self.element_spacing * (iy as f64 * uy + iz as f64 * uz);
                out.push(C64::from_polar(1.0, phase));
            }
        }
        out
    }
}

/// One quasi-static channel draw plus the transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_bu: C64,
    pub h_br: Vec<C64>,
    pub h_ru: Vec<C64>,
    pub tx_power: f64,
}

impl ChannelRealization {
    pub fn new(h_bu: C64, h_br: Vec<C64>, h_ru: Vec<C64>, tx_power: f64) -> Result<Self> {
        if h_br.len() != h_ru.len() {
            return Err(Error::invalid("BS-RIS and RIS-user channels differ in length"));
        }
        if !(tx_power > 0.0 && tx_power.is_finite()) {
            return Err(Error::invalid(format!("transmit power must be positive, got {tx_power}")));
        }
        let finite = std::iter::once(&h_bu)
            .chain(&h_br)
            .chain(&h_ru)
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::invalid("channel coefficients must be finite"));
        }
        Ok(Self {
            h_bu,
            h_br,
            h_ru,
            tx_power,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.h_br.len()
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// Draws a user position uniformly in the user area, then the channels.
pub fn draw_channels<R: Rng + ?Sized>(
    scene: &SceneGeometry,
    config: &BdRisConfig,
    model: &ChannelModel,
    rng: &mut R,
) -> Result<ChannelRealization> {
    scene.validate(config)?;
    let user = scene.sample_user(rng);
    draw_channels_at(scene, config, model, user, rng)
}

/// Channels for a user at a fixed position.
pub fn draw_channels_at<R: Rng + ?Sized>(
    scene: &SceneGeometry,
    config: &BdRisConfig,
    model: &ChannelModel,
    user: [f64; 3],
    rng: &mut R,
) -> Result<ChannelRealization> {
    scene.validate(config)?;
    let d_bu = norm(sub(scene.bs_position, user));
    let d_br = norm(sub(scene.bs_position, scene.ris_position));
    let d_ru = norm(sub(user, scene.ris_position));

    let gain = |link, d| path_loss_db(link, d).map(|pl| 10f64.powf(-pl / 10.0));
    let g_bu = gain(Link::BsUser, d_bu)?;
    let g_br = gain(Link::BsRis, d_br)?;
    let g_ru = gain(Link::RisUser, d_ru)?;

    let h_bu = complex_gaussian(rng, g_bu);
    let n = config.n_elements();
    let (h_br, h_ru) = match model.ris_fading {
        FadingModel::LineOfSight => {
            let amp_br = g_br.sqrt();
            let amp_ru = g_ru.sqrt();
            let h_br = scene
                .steering_vector(scene.bs_position)
                .into_iter()
                .map(|a| a * amp_br)
                .collect();
            let h_ru = scene.steering_vector(user).into_iter().map(|a| a * amp_ru).collect();
            (h_br, h_ru)
        }
        FadingModel::Rayleigh => {
            let h_br = (0..n).map(|_| complex_gaussian(rng, g_br)).collect();
            let h_ru = (0..n).map(|_| complex_gaussian(rng, g_ru)).collect();
            (h_br, h_ru)
        }
    };
    ChannelRealization::new(h_bu, h_br, h_ru, model.tx_power_w)
}

/// `g = sqrt(P) (h_BU + h_RU^H Theta h_BR)` on the dense reflection matrix.
pub fn end_to_end_channel(ch: &ChannelRealization, theta: &ScatteringMatrix) -> Result<C64> {
    if theta.n_elements() != ch.n_elements() {
        return Err(Error::invalid(format!(
            "reflection matrix has {} elements, channel has {}",
            theta.n_elements(),
            ch.n_elements()
        )));
    }
    let dense = theta.to_dense();
    let h_br = DVector::from_column_slice(&ch.h_br);
    let h_ru = DVector::from_column_slice(&ch.h_ru);
    let reflected = (h_ru.adjoint() * dense * h_br)[(0, 0)];
    Ok((ch.h_bu + reflected) * ch.tx_power.sqrt())
}

/// Cascaded channel `h = sqrt(P) [h_BU; vec(M_1*); ...; vec(M_K*)]` with
/// `M = h_RU h_BR^H`, so that `g = v^H h` for every training pattern `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    entries: Vec<C64>,
}

impl CascadedChannel {
    pub fn from_entries(entries: Vec<C64>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `v^H h`.
    pub fn response(&self, v: &TrpVector) -> Result<C64> {
        if v.len() != self.len() {
            return Err(Error::invalid(format!(
                "pattern length {} does not match channel length {}",
                v.len(),
                self.len()
            )));
        }
        Ok(v.entries()
            .iter()
            .zip(&self.entries)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn rotated(&self, phase: f64) -> Self {
        let r = C64::from_polar(1.0, phase);
        Self {
            entries: self.entries.iter().map(|z| z * r).collect(),
        }
    }

    /// Replaces every block `vec(M_k*)` by `vec(((M_k + M_k^T) / 2)*)`.
    ///
    /// Reflection blocks are symmetric, so `v^H h` only sees the symmetric
    /// part of each block. The result gives the same response as `self` for
    /// every physically valid pattern and is the part of the cascaded channel
    /// that power measurements can identify. For `N0 = 1` it is `self`.
    pub fn reciprocal_part(&self, group_size: usize) -> Result<Self> {
        let n0 = group_size;
        if n0 == 0 || self.is_empty() || !(self.len() - 1).is_multiple_of(n0 * n0) {
            return Err(Error::invalid(format!(
                "channel length {} is not 1 + K * {n0}^2",
                self.len()
            )));
        }
        let mut entries = self.entries.clone();
        for block in entries[1..].chunks_exact_mut(n0 * n0) {
            for col in 0..n0 {
                for row in (col + 1)..n0 {
                    let (a, b) = (row + n0 * col, col + n0 * row);
                    let avg = (block[a] + block[b]) * 0.5;
                    block[a] = avg;
                    block[b] = avg;
                }
            }
        }
        Ok(Self { entries })
    }
}

pub fn cascade(ch: &ChannelRealization, config: &BdRisConfig) -> Result<CascadedChannel> {
    if ch.n_elements() != config.n_elements() {
        return Err(Error::invalid(format!(
            "channel has {} elements, BD-RIS has {}",
            ch.n_elements(),
            config.n_elements()
        )));
    }
    let sqrt_p = ch.tx_power.sqrt();
    let n0 = config.group_size();
    let mut entries = Vec::with_capacity(config.trp_len());
    entries.push(ch.h_bu * sqrt_p);
    for k in 0..config.n_groups() {
        let base = k * n0;
        for col in 0..n0 {
            for row in 0..n0 {
                // conj(M_ij) = conj(h_RU,i) h_BR,j
                entries.push(ch.h_ru[base + row].conj() * ch.h_br[base + col] * sqrt_p);
            }
        }
    }
    Ok(CascadedChannel { entries })
}

/// Hermitian `(N0 N + 1)`-square cascaded autocorrelation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrelationMatrix {
    matrix: DMatrix<C64>,
}

impl AutocorrelationMatrix {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("autocorrelation matrix must be square"));
        }
        Ok(Self { matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest `|G_ij - conj(G_ji)|`.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Real part of `v^H G v`; the predicted noiseless power for `v`.
    pub fn quadratic_form(&self, v: &TrpVector) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::invalid("pattern length does not match matrix dimension"));
        }
        let v = DVector::from_column_slice(v.entries());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }
}

/// `G = h h^H`.
pub fn true_autocorrelation(h: &CascadedChannel) -> AutocorrelationMatrix {
    let v = DVector::from_column_slice(h.entries());
    AutocorrelationMatrix {
        matrix: &v * v.adjoint(),
    }
}

/// One received-power sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMeasurement {
    pub trp_index: usize,
    /// Watts.
    pub power: f64,
    /// Noise variance `sigma^2` in watts.
    pub noise_power: f64,
}

/// Received power `|v^H h + n|^2` with `n ~ CN(0, noise_power)`.
pub fn measure_power<R: Rng + ?Sized>(
    h: &CascadedChannel,
    v: &TrpVector,
    trp_index: usize,
    noise_power: f64,
    rng: &mut R,
) -> Result<PowerMeasurement> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(Error::invalid(format!("noise power must be nonnegative, got {noise_power}")));
    }
    let g = h.response(v)?;
    let received = if noise_power > 0.0 {
        g + complex_gaussian(rng, noise_power)
    } else {
        g
    };
    Ok(PowerMeasurement {
        trp_index,
        power: received.norm_sqr().max(0.0),
        noise_power,
    })
}

/// Measures every pattern of `trps` in order.
pub fn measure_all<R: Rng + ?Sized>(
    h: &CascadedChannel,
    trps: &[TrpVector],
    noise_power: f64,
    rng: &mut R,
) -> Result<Vec<PowerMeasurement>> {
    trps.iter()
        .enumerate()
        .map(|(i, v)| measure_power(h, v, i, noise_power, rng))
        .collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}
