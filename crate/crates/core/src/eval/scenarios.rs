use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{confusion, fraction_labelled, metrics, roc, Metrics, RocPoint};
use crate::attacks::{
    gan_grid_train, run_gradient_attack, verify_budget, AttackConfig, AttackKind, GanGridConfig, ModelOracle,
};
use crate::data::{Label, SplitBundle};
use crate::gan::{GanModel, DEFAULT_THRESHOLD};
use crate::nn::Matrix;
use crate::surrogate::{transfer_attack, SurrogateModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Baseline,
    WhiteBox,
    GreyBox1,
    GreyBox2,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Baseline,
        Scenario::WhiteBox,
        Scenario::GreyBox1,
        Scenario::GreyBox2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::WhiteBox => "white-box",
            Scenario::GreyBox1 => "grey-box-1",
            Scenario::GreyBox2 => "grey-box-2",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Scenario::Baseline => "Baseline",
            Scenario::WhiteBox => "White-box",
            Scenario::GreyBox1 => "Grey-box 1",
            Scenario::GreyBox2 => "Grey-box 2",
        }
    }

    /// Attacks that belong to this scenario's row of the detection table.
    pub fn performs(self, kind: AttackKind) -> bool {
        match self {
            Scenario::Baseline => false,
            Scenario::WhiteBox | Scenario::GreyBox1 => kind.is_gradient(),
            Scenario::GreyBox2 => kind == AttackKind::GanGrid,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                let valid: Vec<&str> = Scenario::ALL.iter().map(|k| k.name()).collect();
                Error::Argument(format!("unknown scenario '{s}' (valid: {})", valid.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub column: String,
    /// `None` renders as N/A.
    pub value: Option<f64>,
    pub metrics: Option<Metrics>,
    pub rows: usize,
    pub max_linf: Option<f64>,
    pub queries: Option<u64>,
}

impl ReportCell {
    fn na(column: &str) -> Self {
        Self {
            column: column.into(),
            value: None,
            metrics: None,
            rows: 0,
            max_linf: None,
            queries: None,
        }
    }

    fn value(column: &str, value: f64, rows: usize) -> Self {
        Self {
            value: Some(value),
            rows,
            ..Self::na(column)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    /// Which model the cells were measured on.
    pub model: String,
    pub cells: Vec<ReportCell>,
    pub provenance: BTreeMap<String, String>,
}

impl ScenarioReport {
    pub fn cell(&self, column: &str) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.column == column)
    }

    pub fn value(&self, column: &str) -> Option<f64> {
        self.cell(column).and_then(|c| c.value)
    }

    /// Mean over the non-N/A cells.
    pub fn mean(&self) -> Option<f64> {
        let v: Vec<f64> = self.cells.iter().filter_map(|c| c.value).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub const STABLE_COLUMN: &str = "Stable";
pub const UNSTABLE_COLUMN: &str = "Unstable";
pub const BOTH_COLUMN: &str = "Both Classes";
pub const MEAN_COLUMN: &str = "Mean per class";
pub const AUC_COLUMN: &str = "AUC";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSettings {
    pub scenarios: Vec<Scenario>,
    pub attacks: Vec<AttackKind>,
    pub attack: AttackConfig,
    pub gan_grid: GanGridConfig,
    /// Generated rows classified per GAN-GRID cell.
    pub gan_grid_samples: usize,
    /// Whether the GAN-GRID oracle reveals scores as well as labels.
    pub expose_scores: bool,
    pub roc_thresholds: usize,
    pub seed: u64,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            scenarios: Scenario::ALL.to_vec(),
            attacks: AttackKind::ALL.to_vec(),
            attack: AttackConfig::default(),
            gan_grid: GanGridConfig::default(),
            gan_grid_samples: 1000,
            expose_scores: true,
            roc_thresholds: 101,
            seed: 0,
        }
    }
}

pub struct ScenarioInputs<'a> {
    /// The adversarially trained model.
    pub model: &'a GanModel,
    /// The same architecture trained without the adversarial layer.
    pub baseline: Option<&'a GanModel>,
    pub surrogate: Option<&'a SurrogateModel>,
    /// Test splits in raw units.
    pub split: &'a SplitBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanEvaluation {
    pub model: String,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reports: Vec<ScenarioReport>,
    pub clean: Vec<CleanEvaluation>,
}

impl Evaluation {
    pub fn report(&self, scenario: Scenario, model: &str) -> Option<&ScenarioReport> {
        self.reports.iter().find(|r| r.scenario == scenario && r.model == model)
    }
}

pub const PRIMARY_MODEL: &str = "gan-stability";
pub const BASELINE_MODEL: &str = "baseline";

fn attack_seed(seed: u64, kind: AttackKind) -> u64 {
    let k = AttackKind::ALL.iter().position(|&a| a == kind).unwrap_or(0) as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k + 1)
}

/// Produces one report per (requested scenario, model). Attack scenarios
/// feed the full test set (both classes) to each attack and count a row as
/// detected when the model labels it unstable.
pub fn run_scenarios(inputs: &ScenarioInputs<'_>, settings: &ScenarioSettings) -> Result<Evaluation> {
    settings.attack.validate()?;
    if settings.scenarios.contains(&Scenario::GreyBox1) && inputs.surrogate.is_none() {
        return Err(Error::Config("grey-box-1 requested without a surrogate model".into()));
    }
    let mut models: Vec<(&str, &GanModel)> = vec![(PRIMARY_MODEL, inputs.model)];
    if let Some(b) = inputs.baseline {
        models.push((BASELINE_MODEL, b));
    }
    let test_all = inputs.split.test_all()?;
    let mut reports = Vec::new();
    let mut clean = Vec::new();

    let provenance = |name: &str, model: &GanModel| {
        let mut p = BTreeMap::new();
        p.insert("model".to_string(), name.to_string());
        p.insert("model_seed".to_string(), model.seed().to_string());
        p.insert(
            "adversarial_layer".to_string(),
            model.train_config().adversarial_layer.to_string(),
        );
        p.insert("epsilon".to_string(), settings.attack.epsilon.to_string());
        p.insert("evaluation_seed".to_string(), settings.seed.to_string());
        p
    };

    for scenario in Scenario::ALL {
        if !settings.scenarios.contains(&scenario) {
            continue;
        }
        // transferred rows are shared by every model
        let transfers = if scenario == Scenario::GreyBox1 {
            let mut surrogate = inputs.surrogate.expect("checked above").clone();
            let rows = inputs.split.test_stable.concat(&inputs.split.test_unstable)?;
            let mut out = Vec::new();
            for &kind in settings.attacks.iter().filter(|k| k.is_gradient()) {
                let t = transfer_attack(
                    &mut surrogate,
                    kind,
                    &settings.attack,
                    &rows,
                    attack_seed(settings.seed, kind),
                )?;
                verify_budget(&t.batch)?.into_result()?;
                out.push(t);
            }
            out
        } else {
            Vec::new()
        };

        for &(name, model) in &models {
            let mut cells = Vec::new();
            match scenario {
                Scenario::Baseline => {
                    let (c, ev) = clean_cells(name, model, inputs.split, settings.roc_thresholds)?;
                    cells = c;
                    clean.extend(ev);
                }
                Scenario::WhiteBox => {
                    let x = model.norm_stats().apply_matrix(&test_all.features)?;
                    let mut m = model.clone();
                    for kind in AttackKind::ALL {
                        if !(scenario.performs(kind) && settings.attacks.contains(&kind)) {
                            cells.push(ReportCell::na(kind.title()));
                            continue;
                        }
                        let batch = run_gradient_attack(
                            kind,
                            m.discriminator_mut(),
                            &x,
                            &test_all.labels,
                            &settings.attack,
                            attack_seed(settings.seed, kind),
                        )?;
                        let budget = verify_budget(&batch)?.into_result()?;
                        let c = model.classify_normalized(&batch.x_adv, DEFAULT_THRESHOLD)?;
                        cells.push(detection_cell(kind, &c.labels, Some(budget.max_linf), None)?);
                    }
                }
                Scenario::GreyBox1 => {
                    for kind in AttackKind::ALL {
                        match transfers.iter().find(|t| t.batch.attack == kind) {
                            Some(t) if scenario.performs(kind) => {
                                let budget = verify_budget(&t.batch)?;
                                let raw = t.batch.adv_raw()?;
                                cells.push(detection_from_raw(model, kind, &raw, Some(budget.max_linf), None)?);
                            }
                            _ => cells.push(ReportCell::na(kind.title())),
                        }
                    }
                }
                Scenario::GreyBox2 => {
                    for kind in AttackKind::ALL {
                        if !(scenario.performs(kind) && settings.attacks.contains(&kind)) {
                            cells.push(ReportCell::na(kind.title()));
                            continue;
                        }
                        let mut oracle = ModelOracle::new(model, settings.expose_scores);
                        let gg = GanGridConfig {
                            seed: attack_seed(settings.seed, kind),
                            ..settings.gan_grid.clone()
                        };
                        let result = gan_grid_train(&mut oracle, &gg)?;
                        let samples = result.samples(settings.gan_grid_samples, gg.seed.wrapping_add(1))?;
                        cells.push(detection_from_raw(model, kind, &samples, None, Some(result.queries))?);
                    }
                }
            }
            reports.push(ScenarioReport {
                scenario,
                model: name.to_string(),
                cells,
                provenance: provenance(name, model),
            });
        }
    }
    Ok(Evaluation { reports, clean })
}

/// Per-class accuracy, both-class metrics, mean per-class accuracy and AUC
/// of `model` on the clean test splits (raw units).
pub fn clean_cells(
    name: &str,
    model: &GanModel,
    split: &SplitBundle,
    roc_thresholds: usize,
) -> Result<(Vec<ReportCell>, Option<CleanEvaluation>)> {
    let test_all = split.test_all()?;
    let stable = model.classify(&split.test_stable.features)?;
    let unstable = model.classify(&split.test_unstable.features)?;
    let all = model.classify(&test_all.features)?;
    let acc_s = fraction_labelled(&stable.labels, Label::Stable);
    let acc_u = fraction_labelled(&unstable.labels, Label::Unstable);
    let both = metrics(&confusion(&test_all.labels, &all.labels)?)?;
    let mut cells = vec![
        ReportCell::value(STABLE_COLUMN, acc_s, stable.labels.len()),
        ReportCell::value(UNSTABLE_COLUMN, acc_u, unstable.labels.len()),
        ReportCell {
            metrics: Some(both),
            ..ReportCell::value(BOTH_COLUMN, both.accuracy, all.labels.len())
        },
        ReportCell::value(MEAN_COLUMN, (acc_s + acc_u) / 2.0, all.labels.len()),
    ];
    let unstable_scores: Vec<f64> = all.scores.iter().map(|s| 1.0 - s).collect();
    let clean = match roc(&unstable_scores, &test_all.labels, roc_thresholds) {
        Ok((points, auc)) => {
            cells.push(ReportCell::value(AUC_COLUMN, auc, all.labels.len()));
            Some(CleanEvaluation {
                model: name.to_string(),
                roc: points,
                auc,
            })
        }
        Err(e) => {
            log::warn!("ROC skipped for {name}: {e}");
            None
        }
    };
    Ok((cells, clean))
}

/// Detection cell for rows given in raw units.
pub fn detection_from_raw(
    model: &GanModel,
    kind: AttackKind,
    x_raw: &Matrix,
    max_linf: Option<f64>,
    queries: Option<u64>,
) -> Result<ReportCell> {
    let c = model.classify(x_raw)?;
    detection_cell(kind, &c.labels, max_linf, queries)
}

/// An N/A cell for `kind`.
pub fn not_performed(kind: AttackKind) -> ReportCell {
    ReportCell::na(kind.title())
}

/// Detection = fraction of rows labelled unstable. Metrics treat every
/// adversarial row as a positive.
fn detection_cell(kind: AttackKind, pred: &[Label], max_linf: Option<f64>, queries: Option<u64>) -> Result<ReportCell> {
    let truth = vec![Label::Unstable; pred.len()];
    let m = metrics(&confusion(&truth, pred)?)?;
    Ok(ReportCell {
        metrics: Some(m),
        max_linf,
        queries,
        ..ReportCell::value(kind.title(), fraction_labelled(pred, Label::Unstable), pred.len())
    })
}
