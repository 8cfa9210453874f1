use crate::error::Result;

/// Stop after `patience` epochs without a strict improvement, or after `max_epochs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        Self {
            patience: 10,
            max_epochs: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
    /// Models fitted in one shot.
    SinglePass,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max-epochs",
            StopReason::SinglePass => "single-pass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub metric: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCurve {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were restored; 0 means the initial parameters.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainingCurve {
    /// Curve of a model fitted without epochs.
    pub fn single_point(metric: f64) -> Self {
        Self {
            records: vec![EpochRecord {
                epoch: 1,
                train_loss: f64::NAN,
                metric,
                best_so_far: metric,
            }],
            best_epoch: 1,
            stop_reason: StopReason::SinglePass,
        }
    }

    pub fn epochs_run(&self) -> usize {
        self.records.len()
    }

    pub fn best_metric(&self) -> f64 {
        self.records
            .last()
            .map_or(f64::NEG_INFINITY, |r| r.best_so_far)
    }
}

/// Generic epoch loop with best-snapshot restore.
///
/// `train_epoch` runs one epoch in place and returns the training loss;
/// `validate` scores the current parameters (higher is better).
pub fn run_early_stopping<M, E, V>(
    policy: EarlyStopping,
    mut model: M,
    mut train_epoch: E,
    mut validate: V,
) -> Result<(M, TrainingCurve)>
where
    M: Clone,
    E: FnMut(&mut M, usize) -> Result<f64>,
    V: FnMut(&M) -> Result<f64>,
{
    let mut best_model = model.clone();
    let mut best = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut records = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 1..=policy.max_epochs {
        let train_loss = train_epoch(&mut model, epoch)?;
        let metric = validate(&model)?;
        if metric > best {
            best = metric;
            best_model = model.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        records.push(EpochRecord {
            epoch,
            train_loss,
            metric,
            best_so_far: best,
        });
        if since_best >= policy.patience && epoch < policy.max_epochs {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    Ok((
        best_model,
        TrainingCurve {
            records,
            best_epoch,
            stop_reason,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted(metrics: Vec<f64>, policy: EarlyStopping) -> (usize, TrainingCurve) {
        let mut script = metrics.into_iter();
        run_early_stopping(
            policy,
            0usize,
            |m, epoch| {
                *m = epoch;
                Ok(0.0)
            },
            |_| Ok(script.next().unwrap_or(0.0)),
        )
        .unwrap()
    }

    #[test]
    fn improvements_only_early_stop_at_thirteen() {
        let (model, curve) = scripted(vec![0.1, 0.2, 0.3], EarlyStopping::default());
        assert_eq!(curve.epochs_run(), 13);
        assert_eq!(model, 3);
        assert_eq!(curve.best_epoch, 3);
        assert_eq!(curve.stop_reason, StopReason::Patience);
    }

    #[test]
    fn plateau_from_first_epoch_stops_at_eleven() {
        let (model, curve) = scripted(vec![0.5; 60], EarlyStopping::default());
        assert_eq!(curve.epochs_run(), 11);
        assert_eq!(model, 1);
    }

    #[test]
    fn never_exceeds_max_epochs() {
        let metrics: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (model, curve) = scripted(metrics, EarlyStopping::default());
        assert_eq!(curve.epochs_run(), 50);
        assert_eq!(model, 50);
        assert_eq!(curve.stop_reason, StopReason::MaxEpochs);
    }

    #[test]
    fn best_so_far_is_monotone() {
        let metrics = vec![0.3, 0.1, 0.5, 0.4, 0.5, 0.6, 0.2];
        let (_, curve) = scripted(metrics, EarlyStopping { patience: 3, max_epochs: 50 });
        for w in curve.records.windows(2) {
            assert!(w[1].best_so_far >= w[0].best_so_far);
        }
        assert_eq!(curve.best_epoch, 6);
        assert_eq!(curve.epochs_run(), 9);
    }
}
