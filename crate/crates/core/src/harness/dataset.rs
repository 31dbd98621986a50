use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use super::config::Config;
use super::sim::RangeSynth;
use crate::archive::{meta_get, read_metadata, sidecar_path, write_metadata, Archive};
use crate::error::{param, shape, Result};
use crate::geometry::{gen_uav_trajectory, TrajectoryParams, UavPath, Vec2, Vec3};
use crate::learning::tensor::Tensor;
use crate::learning::{CnnModel, PhiMatrix, Sample as TrainSample, Seq2SeqModel};
use crate::mobility::{MobilityConfig, MobilityTrace};
use crate::par::{self, Exec};
use crate::rng;

/// One simulated revolution with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub phi: PhiMatrix,
    pub params: TrajectoryParams,
    /// True target positions `U` at the spots.
    pub track: Vec<Vec2>,
    /// True positions `F` over the next `horizon` sample instants.
    pub future: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub seed: u64,
    pub config_hash: String,
}

/// Draws sample `index`: a random orbit placed near a target walking a
/// fresh mobility trace, then measures one revolution.
pub fn generate_sample(cfg: &Config, synth: &RangeSynth, seed: u64, index: u64) -> Result<Sample> {
    let mut rng = rng::stream(seed, index);
    let d = &cfg.dataset;
    let n = cfg.episode.n_spots;
    let mobility = MobilityConfig { seed: rng::derive_seed(seed, index), ..cfg.mobility.clone() };
    let trace = MobilityTrace::new(&mobility)?;
    let rho = rng.random_range(d.rho_min..=d.rho_max);
    let a = rng.random::<f64>() * d.a_max_frac * rho;
    let walk_time = if trace.speed() > 0.0 { trace.route_length() / trace.speed() } else { 0.0 };
    let t0 = rng.random::<f64>() * walk_time;
    let start = trace.position_at(t0);
    let (r_off, th) = (d.center_offset_frac * rho * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU);
    let center = start + Vec2::new(r_off * th.cos(), r_off * th.sin());
    let params = TrajectoryParams { x_c: center.x, y_c: center.y, h: cfg.trajectory.h, rho, a, n_spots: n };
    let path = gen_uav_trajectory(&params)?;
    let period = path.closed_length() / cfg.control.uav_speed / n as f64;
    let track = trace.sample(t0, period, n);
    let future = trace.sample(t0 + n as f64 * period, period, cfg.horizon());
    let phi = synth.phi(&path, &track, cfg.episode.n_meas, &mut rng)?;
    Ok(Sample { phi, params, track, future })
}

/// `n_samples` independent revolutions; sample `i` depends only on
/// `(seed, i)`, so the result is the same for any `exec`.
pub fn generate_dataset(cfg: &Config, n_samples: usize, seed: u64, exec: Exec) -> Result<Dataset> {
    if n_samples < 1 {
        return Err(param("n_samples must be >= 1"));
    }
    cfg.validate()?;
    let synth = RangeSynth::new(cfg)?;
    let samples = par::try_map_indexed(exec, n_samples, |i| generate_sample(cfg, &synth, seed, i as u64))?;
    Ok(Dataset { samples, seed, config_hash: cfg.hash() })
}

impl Dataset {
    pub fn n_spots(&self) -> usize {
        self.samples[0].phi.n_spots
    }

    pub fn n_meas(&self) -> usize {
        self.samples[0].phi.n_meas
    }

    pub fn horizon(&self) -> usize {
        self.samples[0].future.len()
    }

    fn block(&self, name: &str, width: usize, f: impl Fn(&Sample) -> Vec<f64>) -> Tensor {
        let m = self.samples.len();
        let data: Vec<f64> = self.samples.iter().flat_map(&f).collect();
        let mut shape = vec![m];
        shape.extend(match name {
            "gamma" => vec![self.n_spots(), self.n_meas()],
            "spots" => vec![self.n_spots(), 3],
            "track" => vec![self.n_spots(), 2],
            "future" => vec![self.horizon(), 2],
            _ => vec![width],
        });
        Tensor::from_vec(&shape, data).expect("consistent sample shapes")
    }

    /// Writes `path` (blocks `gamma`, `spots`, `track`, `future`, `params`)
    /// and its `.meta` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let flat2 = |v: &[Vec2]| v.iter().flat_map(|p| [p.x, p.y]).collect::<Vec<_>>();
        let mut a = Archive::new("dataset");
        a.push("gamma", &self.block("gamma", 0, |s| s.phi.gamma_block.clone()));
        a.push("spots", &self.block("spots", 0, |s| s.phi.spot_block.iter().flat_map(|p| [p.x, p.y, p.z]).collect()));
        a.push("track", &self.block("track", 0, |s| flat2(&s.track)));
        a.push("future", &self.block("future", 0, |s| flat2(&s.future)));
        a.push("params", &self.block("params", 5, |s| vec![s.params.x_c, s.params.y_c, s.params.h, s.params.rho, s.params.a]));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        a.save(path)?;
        let meta: BTreeMap<String, String> = [
            ("kind", "dataset".to_string()),
            ("format_version", crate::archive::VERSION.to_string()),
            ("n_samples", self.samples.len().to_string()),
            ("n_spots", self.n_spots().to_string()),
            ("n_meas", self.n_meas().to_string()),
            ("horizon", self.horizon().to_string()),
            ("seed", self.seed.to_string()),
            ("config_hash", self.config_hash.clone()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        write_metadata(&sidecar_path(path), &meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta = read_metadata(&sidecar_path(path))?;
        let a = Archive::load(path)?;
        let m: usize = meta_get(&meta, "n_samples")?;
        let n: usize = meta_get(&meta, "n_spots")?;
        let l: usize = meta_get(&meta, "n_meas")?;
        let f: usize = meta_get(&meta, "horizon")?;
        let gamma = a.get("gamma")?;
        gamma.check_shape(&[m, n, l], "gamma")?;
        let spots = a.get("spots")?;
        spots.check_shape(&[m, n, 3], "spots")?;
        let track = a.get("track")?;
        track.check_shape(&[m, n, 2], "track")?;
        let future = a.get("future")?;
        future.check_shape(&[m, f, 2], "future")?;
        let params = a.get("params")?;
        params.check_shape(&[m, 5], "params")?;
        let pts = |d: &[f64]| d.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect::<Vec<_>>();
        let samples = (0..m)
            .map(|i| {
                let spot_block: Vec<Vec3> = spots.data[i * n * 3..(i + 1) * n * 3].chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
                let p = &params.data[i * 5..(i + 1) * 5];
                Sample {
                    phi: PhiMatrix { n_spots: n, n_meas: l, gamma_block: gamma.data[i * n * l..(i + 1) * n * l].to_vec(), spot_block },
                    params: TrajectoryParams { x_c: p[0], y_c: p[1], h: p[2], rho: p[3], a: p[4], n_spots: n },
                    track: pts(&track.data[i * n * 2..(i + 1) * n * 2]),
                    future: pts(&future.data[i * f * 2..(i + 1) * f * 2]),
                }
            })
            .collect();
        if m == 0 {
            return Err(shape("dataset is empty"));
        }
        Ok(Self { samples, seed: meta_get(&meta, "seed")?, config_hash: meta.get("config_hash").cloned().unwrap_or_default() })
    }

    pub fn path_of(&self, i: usize) -> UavPath {
        UavPath { spots: self.samples[i].phi.spot_block.clone() }
    }
}

/// `(input, label)` pairs for the CNN estimator.
pub fn cnn_samples(ds: &Dataset, model: &CnnModel, exec: Exec) -> Result<Vec<TrainSample>> {
    par::try_map_indexed(exec, ds.samples.len(), |i| {
        let s = &ds.samples[i];
        Ok((model.encode(&s.phi)?, model.encode_track(&s.phi, &s.track)?))
    })
}

/// `(U, F)` pairs for the forecaster, built from the true tracks.
pub fn lstm_samples(ds: &Dataset, model: &Seq2SeqModel, exec: Exec) -> Result<Vec<TrainSample>> {
    par::try_map_indexed(exec, ds.samples.len(), |i| {
        let s = &ds.samples[i];
        model.encode_pair(&s.track, &s.future)
    })
}
