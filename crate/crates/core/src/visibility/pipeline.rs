use std::io::Write;

use rayon::prelude::*;

use super::encode::{encode_series, CodeBook};
use super::motifs::{enumerate_admissible_motifs, motif_profile, FeatureVector, MotifCatalog};
use super::pca::{pca_fit, PcaProjection};
use super::svm::{svm_fit, LinearSvm, SvmConfig};
use crate::classify::Classifier;
use crate::error::{Error, Result};
use crate::neural::Checkpoint;
use crate::session::{Dataset, EventCategory, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct VgConfig {
    pub k: usize,
    pub codebook: CodeBook,
    pub window: usize,
    pub value_range: usize,
    pub variance_target: f64,
    pub svm: SvmConfig,
}

impl Default for VgConfig {
    fn default() -> Self {
        Self {
            k: 1,
            codebook: CodeBook::default(),
            window: 4,
            value_range: 6,
            variance_target: 0.95,
            svm: SvmConfig::default(),
        }
    }
}

/// Fitted encode, graph, motif, PCA and SVM chain.
#[derive(Debug, Clone, PartialEq)]
pub struct VgPipeline {
    pub config: VgConfig,
    pub catalog: MotifCatalog,
    pub pca: PcaProjection,
    pub svm: LinearSvm,
}

fn raw_features(symbols: &[EventCategory], config: &VgConfig, catalog: &MotifCatalog) -> Result<Vec<f64>> {
    let series = encode_series(symbols, config.k, &config.codebook)?;
    Ok(motif_profile(&series, catalog)?.to_vec())
}

fn feature_matrix(data: &Dataset, config: &VgConfig, catalog: &MotifCatalog) -> Result<Vec<Vec<f64>>> {
    data.sessions
        .par_iter()
        .map(|s| raw_features(s.symbols(), config, catalog))
        .collect()
}

pub fn fit_vg(train: &Dataset, config: &VgConfig) -> Result<VgPipeline> {
    let catalog = enumerate_admissible_motifs(config.window, config.value_range)?;
    let features = feature_matrix(train, config, &catalog)?;
    let pca = pca_fit(&features, config.variance_target)?;
    let projected = features
        .iter()
        .map(|f| pca.transform(f))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<bool> = train.iter().map(|s| s.label().is_buy()).collect();
    let svm = svm_fit(&projected, &labels, &config.svm)?;
    Ok(VgPipeline {
        config: config.clone(),
        catalog,
        pca,
        svm,
    })
}

impl VgPipeline {
    pub fn features(&self, symbols: &[EventCategory]) -> Result<Vec<f64>> {
        raw_features(symbols, &self.config, &self.catalog)
    }

    pub fn decision(&self, symbols: &[EventCategory]) -> Result<f64> {
        self.svm.decision(&self.pca.transform(&self.features(symbols)?)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        let mut ckpt = Checkpoint::new("vg");
        ckpt.set_meta("k", c.k);
        let order: Vec<&str> = c.codebook.order().iter().map(|e| e.token()).collect();
        ckpt.set_meta("codebook", order.join(","));
        ckpt.set_meta("window", c.window);
        ckpt.set_meta("value_range", c.value_range);
        ckpt.set_meta("variance_target", c.variance_target);
        ckpt.set_meta("c", c.svm.c);
        ckpt.set_meta("iterations", c.svm.iterations);
        let patterns: Vec<String> = self.catalog.patterns().iter().map(u64::to_string).collect();
        ckpt.set_meta("motifs", patterns.join(" "));
        ckpt.set_meta("retained_fraction", self.pca.retained_fraction);
        let d = self.pca.input_dim();
        let r = self.pca.output_dim();
        ckpt.push_tensor("pca.mean", vec![d], self.pca.mean.clone());
        ckpt.push_tensor("pca.scale", vec![d], self.pca.scale.clone());
        ckpt.push_tensor("pca.explained", vec![d], self.pca.explained_variance.clone());
        ckpt.push_tensor("pca.components", vec![r, d], self.pca.components.concat());
        ckpt.push_tensor("svm.weights", vec![r], self.svm.weights.clone());
        ckpt.push_tensor("svm.bias", vec![1], vec![self.svm.bias]);
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != "vg" {
            return Err(Error::Checkpoint(format!("expected vg, found `{}`", ckpt.kind)));
        }
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let order = ckpt
            .meta("codebook")?
            .split(',')
            .map(|t| t.parse::<EventCategory>())
            .collect::<Result<Vec<_>>>()?;
        let config = VgConfig {
            k: ckpt.meta_parsed("k")?,
            codebook: CodeBook::from_order(&order)?,
            window: ckpt.meta_parsed("window")?,
            value_range: ckpt.meta_parsed("value_range")?,
            variance_target: ckpt.meta_parsed("variance_target")?,
            svm: SvmConfig {
                c: ckpt.meta_parsed("c")?,
                iterations: ckpt.meta_parsed("iterations")?,
            },
        };
        let patterns = ckpt
            .meta("motifs")?
            .split_whitespace()
            .map(|p| p.parse::<u64>().map_err(|_| bad("bad motif mask")))
            .collect::<Result<Vec<_>>>()?;
        let catalog = MotifCatalog::from_patterns(config.window, patterns)?;
        let comps = ckpt.tensor("pca.components")?;
        let mean = ckpt.tensor("pca.mean")?.data.clone();
        let d = mean.len();
        if d != catalog.len() + 4 || comps.shape.len() != 2 || comps.shape[1] != d {
            return Err(bad("PCA shape does not match the motif catalog"));
        }
        let pca = PcaProjection {
            mean,
            scale: ckpt.tensor("pca.scale")?.data.clone(),
            components: comps.data.chunks(d).map(<[f64]>::to_vec).collect(),
            explained_variance: ckpt.tensor("pca.explained")?.data.clone(),
            retained_fraction: ckpt.meta_parsed("retained_fraction")?,
        };
        let weights = ckpt.tensor("svm.weights")?.data.clone();
        let bias = ckpt.tensor("svm.bias")?.data.first().copied().ok_or_else(|| bad("empty bias"))?;
        if pca.scale.len() != d || weights.len() != pca.output_dim() {
            return Err(bad("SVM shape does not match PCA"));
        }
        Ok(Self {
            svm: LinearSvm {
                weights,
                bias,
                c: config.svm.c,
            },
            config,
            catalog,
            pca,
        })
    }
}

impl Classifier for VgPipeline {
    fn predict(&self, symbols: &[EventCategory]) -> Result<Label> {
        Ok(if self.decision(symbols)? > 0.0 {
            Label::Buy
        } else {
            Label::NoBuy
        })
    }
}

/// One row per session: label followed by the raw (unstandardized) features.
pub fn write_feature_csv<W: Write>(data: &Dataset, config: &VgConfig, mut out: W) -> Result<()> {
    let catalog = enumerate_admissible_motifs(config.window, config.value_range)?;
    let rows = feature_matrix(data, config, &catalog)?;
    writeln!(out, "label,{}", FeatureVector::names(&catalog).join(","))?;
    for (s, row) in data.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{},{}", s.label().token(), cells.join(","))?;
    }
    Ok(())
}
