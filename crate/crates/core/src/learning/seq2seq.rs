use std::collections::BTreeMap;

use rand::SeedableRng;

use super::layers::{Dense, LstmCell, LstmStep};
use super::model::{fill_from_archive, Model};
use super::tensor::{mse_loss, pair_mut, Grads, Tensor};
use crate::archive::{meta_get, Archive};
use crate::error::{param, shape, state, Result};
use crate::geometry::Vec2;
use crate::rng::SimRng;

/// Encoder-decoder LSTM forecaster. The encoder's final state seeds the
/// decoder, which is fed that final hidden vector at every one of its
/// `horizon` steps; a dense head maps each decoder output to a 2D point.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub hidden: usize,
    pub horizon: usize,
    pub scale: f64,
    pub seed: u64,
    pub encoder: LstmCell,
    pub decoder: LstmCell,
    pub head: Dense,
    ready: bool,
}

struct Trace {
    enc: Vec<LstmStep>,
    dec: Vec<LstmStep>,
    out: Vec<f64>,
}

impl Seq2SeqModel {
    pub fn new(hidden: usize, horizon: usize, scale: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(param("forecast horizon must be at least 1"));
        }
        if hidden == 0 {
            return Err(param("hidden size must be at least 1"));
        }
        if !(scale > 0.0) {
            return Err(param(format!("scale must be positive, got {scale}")));
        }
        Ok(Self {
            hidden,
            horizon,
            scale,
            seed: 0,
            encoder: LstmCell::new(2, hidden),
            decoder: LstmCell::new(hidden, hidden),
            head: Dense::new(hidden, 2),
            ready: false,
        })
    }

    pub fn init(&mut self, seed: u64) {
        let mut rng = SimRng::seed_from_u64(seed);
        self.encoder.init(&mut rng);
        self.decoder.init(&mut rng);
        self.head.init_glorot(&mut rng);
        self.seed = seed;
        self.ready = true;
    }

    pub fn initialized(hidden: usize, horizon: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut m = Self::new(hidden, horizon, scale)?;
        m.init(seed);
        Ok(m)
    }

    pub fn mark_ready(&mut self) {
        self.ready = true;
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    fn run(&self, x: &[f64]) -> Trace {
        let hd = self.hidden;
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut enc = Vec::with_capacity(x.len() / 2);
        for p in x.chunks_exact(2) {
            let s = self.encoder.step(p, &h, &c);
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            enc.push(s);
        }
        let summary = h.clone();
        let mut dec = Vec::with_capacity(self.horizon);
        let mut out = Vec::with_capacity(2 * self.horizon);
        for _ in 0..self.horizon {
            let s = self.decoder.step(&summary, &h, &c);
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            out.extend(self.head.forward(&s.h));
            dec.push(s);
        }
        Trace { enc, dec, out }
    }

    /// Reference point of an input track: its mean.
    pub fn reference(track: &[Vec2]) -> Vec2 {
        let n = track.len().max(1) as f64;
        let (sx, sy) = track.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        Vec2::new(sx / n, sy / n)
    }

    pub fn encode(&self, track: &[Vec2], reference: Vec2) -> Vec<f64> {
        track.iter().flat_map(|p| [(p.x - reference.x) / self.scale, (p.y - reference.y) / self.scale]).collect()
    }

    pub fn decode(&self, out: &[f64], reference: Vec2) -> Vec<Vec2> {
        out.chunks_exact(2).map(|v| Vec2::new(v[0] * self.scale + reference.x, v[1] * self.scale + reference.y)).collect()
    }

    /// Normalized `(input, target)` pair for one training example.
    pub fn encode_pair(&self, input: &[Vec2], future: &[Vec2]) -> Result<(Vec<f64>, Vec<f64>)> {
        if input.is_empty() {
            return Err(shape("input track is empty"));
        }
        if future.len() != self.horizon {
            return Err(shape(format!("future has {} points, horizon is {}", future.len(), self.horizon)));
        }
        let r = Self::reference(input);
        Ok((self.encode(input, r), self.encode(future, r)))
    }
}

/// Forecast `F̂` for the next `horizon` steps after `u_hat`.
pub fn lstm_forecast(model: &Seq2SeqModel, u_hat: &[Vec2]) -> Result<Vec<Vec2>> {
    if model.horizon == 0 {
        return Err(param("forecast horizon must be at least 1"));
    }
    if !model.is_ready() {
        return Err(state("LSTM parameters were never initialized or loaded"));
    }
    if u_hat.is_empty() {
        return Err(shape("input track is empty"));
    }
    let r = Seq2SeqModel::reference(u_hat);
    Ok(model.decode(&model.forward(&model.encode(u_hat, r)), r))
}

impl Model for Seq2SeqModel {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.encoder.w, &self.encoder.b, &self.decoder.w, &self.decoder.b, &self.head.w, &self.head.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.encoder.w,
            &mut self.encoder.b,
            &mut self.decoder.w,
            &mut self.decoder.b,
            &mut self.head.w,
            &mut self.head.b,
        ]
    }

    fn param_names(&self) -> Vec<String> {
        ["encoder.w", "encoder.b", "decoder.w", "decoder.b", "head.w", "head.b"].map(String::from).to_vec()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.run(x).out
    }

    fn loss_grad(&self, x: &[f64], y: &[f64], g: &mut Grads) -> f64 {
        let t = self.run(x);
        let (loss, dout) = mse_loss(&t.out, y);
        let hd = self.hidden;
        let mut dh = vec![0.0; hd];
        let mut dc = vec![0.0; hd];
        let mut dsummary = vec![0.0; hd];
        for (f, s) in t.dec.iter().enumerate().rev() {
            let (gw, gb) = pair_mut(g, 4);
            let dhead = self.head.backward(&s.h, &dout[2 * f..2 * f + 2], gw, gb);
            let dh_total: Vec<f64> = dh.iter().zip(&dhead).map(|(a, b)| a + b).collect();
            let (gw, gb) = pair_mut(g, 2);
            let (dx, dh_prev, dc_prev) = self.decoder.step_backward(s, &dh_total, &dc, gw, gb);
            dsummary.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            dh = dh_prev;
            dc = dc_prev;
        }
        dh.iter_mut().zip(&dsummary).for_each(|(a, b)| *a += b);
        for s in t.enc.iter().rev() {
            let (gw, gb) = pair_mut(g, 0);
            let (_, dh_prev, dc_prev) = self.encoder.step_backward(s, &dh, &dc, gw, gb);
            dh = dh_prev;
            dc = dc_prev;
        }
        loss
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        [
            ("model", "seq2seq".to_string()),
            ("format_version", crate::archive::VERSION.to_string()),
            ("hidden", self.hidden.to_string()),
            ("horizon", self.horizon.to_string()),
            ("scale", self.scale.to_string()),
            ("seed", self.seed.to_string()),
            ("param_count", self.param_count().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    fn from_parts(meta: &BTreeMap<String, String>, archive: &Archive) -> Result<Self> {
        let mut m = Self::new(meta_get(meta, "hidden")?, meta_get(meta, "horizon")?, meta_get(meta, "scale")?)?;
        m.seed = meta_get(meta, "seed")?;
        fill_from_archive(&mut m, archive)?;
        m.ready = true;
        Ok(m)
    }

    fn kind(&self) -> &'static str {
        "seq2seq"
    }
}
