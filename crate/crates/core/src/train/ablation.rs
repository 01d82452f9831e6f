//! Experiment grids: each condition is trained once per seed, and every
//! condition sees the same seeds so comparisons between them are paired.

use std::fmt::Write;

use super::{confidence_interval, mean, train, RunConfig, TrainError};
use crate::config::DelayMode;
use crate::data::DenseSample;

#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    /// Connection density × delay mode × fixed/learnable delays.
    SparsitySweep { densities: Vec<f64>, modes: Vec<DelayMode> },
    /// The base configuration with delays frozen at initialization and learned.
    FixedVsLearnable,
    /// Recurrent network with delays on {input, recurrent, both} connections,
    /// each synaptic or axonal.
    DelayPlacement,
    /// No delays, varying hidden width.
    WeightsOnlyWidth { widths: Vec<usize> },
}

impl Protocol {
    pub const NAMES: [&'static str; 4] =
        ["sparsity_sweep", "fixed_vs_learnable", "delay_placement", "weights_only_width"];

    /// Protocol with its default grid.
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "sparsity_sweep" => Some(Self::SparsitySweep {
                densities: vec![1.0, 0.5, 0.2],
                modes: vec![DelayMode::Axonal, DelayMode::Synaptic],
            }),
            "fixed_vs_learnable" => Some(Self::FixedVsLearnable),
            "delay_placement" => Some(Self::DelayPlacement),
            "weights_only_width" => Some(Self::WeightsOnlyWidth { widths: vec![16, 32, 64, 128] }),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SparsitySweep { .. } => "sparsity_sweep",
            Self::FixedVsLearnable => "fixed_vs_learnable",
            Self::DelayPlacement => "delay_placement",
            Self::WeightsOnlyWidth { .. } => "weights_only_width",
        }
    }

    pub fn conditions(&self, base: &RunConfig) -> Result<Vec<Condition>, TrainError> {
        let with = |name: String, f: &dyn Fn(&mut RunConfig)| {
            let mut run = base.clone();
            f(&mut run);
            Condition { name, run }
        };
        let fixed_learnable = |run: &mut RunConfig, learnable: bool| {
            run.learn.delays_in = learnable;
            run.learn.delays_rec = learnable;
        };
        let mut out = Vec::new();
        match self {
            Self::SparsitySweep { densities, modes } => {
                if let Some(d) = densities.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
                    return Err(TrainError::Input(format!("density {d} outside (0, 1]")));
                }
                for mode in modes {
                    for &density in densities {
                        for learnable in [false, true] {
                            let name = format!(
                                "{}-{}-density{}",
                                mode.name(),
                                if learnable { "learnable" } else { "fixed" },
                                density
                            );
                            out.push(with(name, &|r| {
                                r.net.delay_in = *mode;
                                r.net.sparsity = 1.0 - density;
                                fixed_learnable(r, learnable);
                            }));
                        }
                    }
                }
            }
            Self::FixedVsLearnable => {
                if base.net.delay_in == DelayMode::None && base.net.delay_rec == DelayMode::None {
                    return Err(TrainError::Input("fixed_vs_learnable needs a configuration with delays".into()));
                }
                out.push(with("fixed".into(), &|r| fixed_learnable(r, false)));
                out.push(with("learnable".into(), &|r| fixed_learnable(r, true)));
            }
            Self::DelayPlacement => {
                for placement in ["input", "recurrent", "both"] {
                    for mode in [DelayMode::Synaptic, DelayMode::Axonal] {
                        out.push(with(format!("{placement}-{}", mode.name()), &|r| {
                            r.net.recurrent = true;
                            r.net.delay_in = if placement == "recurrent" { DelayMode::None } else { mode };
                            r.net.delay_rec = if placement == "input" { DelayMode::None } else { mode };
                            fixed_learnable(r, true);
                        }));
                    }
                }
            }
            Self::WeightsOnlyWidth { widths } => {
                for &w in widths {
                    out.push(with(format!("width{w}"), &|r| {
                        r.net.n_hidden = w;
                        r.net.delay_in = DelayMode::None;
                        r.net.delay_rec = DelayMode::None;
                        fixed_learnable(r, false);
                    }));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub condition: String,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub condition: String,
    pub n: usize,
    pub mean: f64,
    /// 95% half-width; absent with a single run.
    pub ci: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub protocol: String,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Accuracies of one condition in seed order.
    pub fn accuracies(&self, condition: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.condition == condition).map(|r| r.accuracy).collect()
    }

    pub fn summary(&self) -> Vec<ConditionSummary> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.condition.as_str()) {
                names.push(&r.condition);
            }
        }
        names
            .into_iter()
            .map(|c| {
                let acc = self.accuracies(c);
                let ci = confidence_interval(&acc).ok().map(|(_, h)| h);
                ConditionSummary { condition: c.into(), n: acc.len(), mean: mean(&acc), ci }
            })
            .collect()
    }

    /// Columns `protocol,condition,seed,accuracy`.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("protocol,condition,seed,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", self.protocol, r.condition, r.seed, r.accuracy);
        }
        out
    }

    /// Columns `protocol,condition,n,mean,ci`; `ci` is empty for single runs.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("protocol,condition,n,mean,ci\n");
        for s in self.summary() {
            let ci = s.ci.map_or(String::new(), |c| c.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", self.protocol, s.condition, s.n, s.mean, ci);
        }
        out
    }
}

/// Train every condition with seeds `base.net.seed .. base.net.seed + base.repeats`
/// and record the final test accuracy.
pub fn run_ablation(
    protocol: &Protocol,
    base: &RunConfig,
    train_set: &[DenseSample],
    test_set: &[DenseSample],
    mut on_run: impl FnMut(&AblationRow),
) -> Result<AblationReport, TrainError> {
    base.validate()?;
    if test_set.is_empty() {
        return Err(TrainError::Input("ablation needs a non-empty test set".into()));
    }
    let conditions = protocol.conditions(base)?;
    for c in &conditions {
        c.run.validate()?;
    }
    let mut rows = Vec::new();
    for r in 0..base.repeats as u64 {
        let seed = base.net.seed.wrapping_add(r);
        for c in &conditions {
            let mut run = c.run.clone();
            run.net.seed = seed;
            let (_, metrics) = train(&run, train_set, test_set)?;
            let row =
                AblationRow { condition: c.name.clone(), seed, accuracy: metrics.final_test_accuracy().unwrap_or(0.0) };
            on_run(&row);
            rows.push(row);
        }
    }
    Ok(AblationReport { protocol: protocol.name().into(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_grid() {
        let conds = Protocol::DelayPlacement.conditions(&RunConfig::default()).unwrap();
        let names: Vec<_> = conds.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "input-synaptic",
                "input-axonal",
                "recurrent-synaptic",
                "recurrent-axonal",
                "both-synaptic",
                "both-axonal"
            ]
        );
        for c in &conds {
            assert!(c.run.net.recurrent);
            c.run.validate().unwrap();
        }
        assert_eq!(conds[2].run.net.delay_in, DelayMode::None);
        assert_eq!(conds[0].run.net.delay_rec, DelayMode::None);
        assert_eq!(conds[5].run.net.delay_in, DelayMode::Axonal);
        assert_eq!(conds[5].run.net.delay_rec, DelayMode::Axonal);
    }

    #[test]
    fn sweep_and_width_grids() {
        let p = Protocol::SparsitySweep { densities: vec![1.0, 0.2], modes: vec![DelayMode::Synaptic] };
        let conds = p.conditions(&RunConfig::default()).unwrap();
        assert_eq!(conds.len(), 4);
        assert!((conds[2].run.net.sparsity - 0.8).abs() < 1e-12);
        assert!(!conds[2].run.learn.delays_in && conds[3].run.learn.delays_in);
        let bad = Protocol::SparsitySweep { densities: vec![0.0], modes: vec![DelayMode::Synaptic] };
        assert!(bad.conditions(&RunConfig::default()).is_err());

        let conds = Protocol::WeightsOnlyWidth { widths: vec![16, 128] }.conditions(&RunConfig::default()).unwrap();
        assert_eq!(conds[1].run.net.n_hidden, 128);
        assert_eq!(conds[1].run.net.delay_in, DelayMode::None);
        for name in Protocol::NAMES {
            assert_eq!(Protocol::parse(name).unwrap().name(), name);
        }
    }

    #[test]
    fn report_csvs() {
        let report = AblationReport {
            protocol: "p".into(),
            rows: vec![
                AblationRow { condition: "a".into(), seed: 0, accuracy: 0.5 },
                AblationRow { condition: "b".into(), seed: 0, accuracy: 1.0 },
                AblationRow { condition: "a".into(), seed: 1, accuracy: 1.0 },
            ],
        };
        assert_eq!(report.runs_csv().lines().count(), 4);
        let s = report.summary();
        assert_eq!(s[0].condition, "a");
        assert_eq!(s[0].mean, 0.75);
        assert!(s[0].ci.is_some() && s[1].ci.is_none());
        assert!(report.summary_csv().contains("p,b,1,1,\n"));
    }
}
