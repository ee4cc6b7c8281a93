//! Questionnaire answers and the rule table that maps them to a problem setting.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{AutoAnswers, ScoreType, TargetSide};
use crate::splitter::ValidationSetting;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectorError {
    #[error("question {0} expresses user intent and must be answered")]
    MissingIntent(Question),
    #[error("answer to {0} contradicts the loaded dataset")]
    ContradictoryOverride(Question),
    #[error("unsupported combination {answers}: {reason}")]
    UnsupportedCombination {
        answers: QuestionnaireAnswers,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Question {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Answer to Q6. `Any` only appears when the score type is left open; it is
/// not one of the enumerated concrete values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreAnswer {
    Binary,
    Nominal,
    Ordinal,
    Real,
    Any,
}

impl ScoreAnswer {
    pub const CONCRETE: [ScoreAnswer; 4] = [
        ScoreAnswer::Binary,
        ScoreAnswer::Nominal,
        ScoreAnswer::Ordinal,
        ScoreAnswer::Real,
    ];
}

impl From<ScoreType> for ScoreAnswer {
    fn from(t: ScoreType) -> Self {
        match t {
            ScoreType::Binary => ScoreAnswer::Binary,
            ScoreType::Nominal => ScoreAnswer::Nominal,
            ScoreType::Ordinal => ScoreAnswer::Ordinal,
            ScoreType::Real => ScoreAnswer::Real,
        }
    }
}

impl FromStr for ScoreAnswer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "any" | "-" => Ok(ScoreAnswer::Any),
            other => other.parse::<ScoreType>().map(ScoreAnswer::from),
        }
    }
}

impl FromStr for TargetSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "no" => Ok(TargetSide::No),
            "yes" => Ok(TargetSide::Yes),
            "yes_hierarchy" | "hierarchy" => Ok(TargetSide::YesHierarchy),
            other => Err(format!("expected no, yes or yes_hierarchy, got '{other}'")),
        }
    }
}

pub fn parse_yes_no(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "yes" | "y" | "true" => Ok(true),
        "no" | "n" | "false" => Ok(false),
        other => Err(format!("expected yes or no, got '{other}'")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuestionnaireAnswers {
    pub novel_instances: bool,
    pub novel_targets: bool,
    pub instance_side: bool,
    pub target_side: TargetSide,
    pub fully_observed: bool,
    pub score_type: ScoreAnswer,
}

impl QuestionnaireAnswers {
    pub fn new(q1: bool, q2: bool, q3: bool, q4: TargetSide, q5: bool, q6: ScoreAnswer) -> Self {
        Self {
            novel_instances: q1,
            novel_targets: q2,
            instance_side: q3,
            target_side: q4,
            fully_observed: q5,
            score_type: q6,
        }
    }
}

impl fmt::Display for QuestionnaireAnswers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        let q4 = match self.target_side {
            TargetSide::No => "no",
            TargetSide::Yes => "yes",
            TargetSide::YesHierarchy => "yes_hierarchy",
        };
        let q6 = match self.score_type {
            ScoreAnswer::Any => "any",
            ScoreAnswer::Binary => "binary",
            ScoreAnswer::Nominal => "nominal",
            ScoreAnswer::Ordinal => "ordinal",
            ScoreAnswer::Real => "real",
        };
        write!(
            f,
            "({},{},{},{},{},{})",
            yn(self.novel_instances),
            yn(self.novel_targets),
            yn(self.instance_side),
            q4,
            yn(self.fully_observed),
            q6
        )
    }
}

/// Answers supplied by the user; any of them may be missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PartialAnswers {
    pub q1: Option<bool>,
    pub q2: Option<bool>,
    pub q3: Option<bool>,
    pub q4: Option<TargetSide>,
    pub q5: Option<bool>,
    pub q6: Option<ScoreAnswer>,
}

/// Merges the dataset-derived answers with the user's. Q1 and Q2 must come from
/// the user; Q3-Q6 may be restated but not contradicted. Claiming plain target
/// side information when a hierarchy is loaded is accepted (a hierarchy is
/// side information), and so is leaving the score type open.
pub fn resolve_answers(
    auto: &AutoAnswers,
    user: &PartialAnswers,
) -> Result<QuestionnaireAnswers, SelectorError> {
    let q1 = user.q1.ok_or(SelectorError::MissingIntent(Question::Q1))?;
    let q2 = user.q2.ok_or(SelectorError::MissingIntent(Question::Q2))?;

    let q3 = match user.q3 {
        Some(v) if v != auto.instance_side => {
            return Err(SelectorError::ContradictoryOverride(Question::Q3))
        }
        _ => auto.instance_side,
    };
    let q4 = match user.q4 {
        None => auto.target_side,
        Some(v) if v == auto.target_side => v,
        Some(TargetSide::Yes) if auto.target_side == TargetSide::YesHierarchy => TargetSide::Yes,
        Some(_) => return Err(SelectorError::ContradictoryOverride(Question::Q4)),
    };
    let q5 = match user.q5 {
        Some(v) if v != auto.fully_observed => {
            return Err(SelectorError::ContradictoryOverride(Question::Q5))
        }
        _ => auto.fully_observed,
    };
    let detected = ScoreAnswer::from(auto.score_type);
    let q6 = match user.q6 {
        None => detected,
        Some(v) if v == detected || v == ScoreAnswer::Any => v,
        Some(_) => return Err(SelectorError::ContradictoryOverride(Question::Q6)),
    };
    Ok(QuestionnaireAnswers::new(q1, q2, q3, q4, q5, q6))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SettingLabel {
    MultiLabelClassification,
    MultivariateRegression,
    MultiTaskLearning,
    HierarchicalMultiLabelClassification,
    DyadicPrediction,
    ZeroShotLearning,
    MatrixCompletion,
    HybridMatrixCompletion,
    ColdStartCollaborativeFiltering,
    MultiDimensionalClassification,
}

impl SettingLabel {
    pub fn display_name(self) -> &'static str {
        match self {
            SettingLabel::MultiLabelClassification => "Multi-label classification",
            SettingLabel::MultivariateRegression => "Multivariate regression",
            SettingLabel::MultiTaskLearning => "Multi-task learning",
            SettingLabel::HierarchicalMultiLabelClassification => {
                "Hierarchical multi-label classification"
            }
            SettingLabel::DyadicPrediction => "Dyadic prediction",
            SettingLabel::ZeroShotLearning => "Zero-shot learning",
            SettingLabel::MatrixCompletion => "Matrix completion",
            SettingLabel::HybridMatrixCompletion => "Hybrid matrix completion",
            SettingLabel::ColdStartCollaborativeFiltering => "Cold-start collaborative filtering",
            SettingLabel::MultiDimensionalClassification => "Multi-dimensional classification",
        }
    }

    pub fn default_validation_setting(self) -> ValidationSetting {
        use SettingLabel::*;
        match self {
            MatrixCompletion | HybridMatrixCompletion => ValidationSetting::A,
            ZeroShotLearning | ColdStartCollaborativeFiltering => ValidationSetting::D,
            MultiLabelClassification
            | MultivariateRegression
            | MultiTaskLearning
            | HierarchicalMultiLabelClassification
            | DyadicPrediction
            | MultiDimensionalClassification => ValidationSetting::B,
        }
    }
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MtpSetting {
    pub label: SettingLabel,
    pub default_validation_setting: ValidationSetting,
    /// Set when the answers only matched after treating a fully observed
    /// matrix as a partially observed one.
    pub relaxed_fully_observed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Q4Pattern {
    No,
    /// Plain side information or a hierarchy.
    AnySide,
    Hierarchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Q6Pattern {
    Only(ScoreAnswer),
    /// The "-" rows: any trainable score type.
    Trainable,
    /// Shared row of zero-shot learning and cold-start filtering; see [`RULES`].
    TrainableExceptOrdinal,
}

struct Rule {
    q1: bool,
    q2: bool,
    q3: bool,
    q4: Q4Pattern,
    q5: bool,
    q6: Q6Pattern,
    label: SettingLabel,
}

/// One entry per row of the rule table, in table order.
///
/// Zero-shot learning and cold-start collaborative filtering share the same
/// Q1-Q5 answers. They are told apart by score type: ordinal ratings are the
/// collaborative-filtering signal, every other trainable type (and an open
/// score type) goes to zero-shot learning.
const RULES: [Rule; 10] = {
    use Q4Pattern as Q4;
    use Q6Pattern as Q6;
    use SettingLabel::*;
    [
        Rule {
            q1: true,
            q2: false,
            q3: true,
            q4: Q4::No,
            q5: true,
            q6: Q6::Only(ScoreAnswer::Binary),
            label: MultiLabelClassification,
        },
        Rule {
            q1: true,
            q2: false,
            q3: true,
            q4: Q4::No,
            q5: true,
            q6: Q6::Only(ScoreAnswer::Real),
            label: MultivariateRegression,
        },
        Rule {
            q1: true,
            q2: false,
            q3: true,
            q4: Q4::No,
            q5: false,
            q6: Q6::Trainable,
            label: MultiTaskLearning,
        },
        Rule {
            q1: true,
            q2: false,
            q3: true,
            q4: Q4::Hierarchy,
            q5: true,
            q6: Q6::Only(ScoreAnswer::Binary),
            label: HierarchicalMultiLabelClassification,
        },
        Rule {
            q1: true,
            q2: false,
            q3: true,
            q4: Q4::AnySide,
            q5: false,
            q6: Q6::Trainable,
            label: DyadicPrediction,
        },
        Rule {
            q1: true,
            q2: true,
            q3: true,
            q4: Q4::AnySide,
            q5: false,
            q6: Q6::TrainableExceptOrdinal,
            label: ZeroShotLearning,
        },
        Rule {
            q1: false,
            q2: false,
            q3: false,
            q4: Q4::No,
            q5: false,
            q6: Q6::Trainable,
            label: MatrixCompletion,
        },
        Rule {
            q1: false,
            q2: false,
            q3: true,
            q4: Q4::AnySide,
            q5: false,
            q6: Q6::Trainable,
            label: HybridMatrixCompletion,
        },
        Rule {
            q1: true,
            q2: true,
            q3: true,
            q4: Q4::AnySide,
            q5: false,
            q6: Q6::Only(ScoreAnswer::Ordinal),
            label: ColdStartCollaborativeFiltering,
        },
        Rule {
            q1: true,
            q2: false,
            q3: true,
            q4: Q4::No,
            q5: true,
            q6: Q6::Only(ScoreAnswer::Nominal),
            label: MultiDimensionalClassification,
        },
    ]
};

impl Rule {
    fn matches(&self, a: &QuestionnaireAnswers) -> bool {
        let q4 = match self.q4 {
            Q4Pattern::No => a.target_side == TargetSide::No,
            Q4Pattern::AnySide => a.target_side != TargetSide::No,
            Q4Pattern::Hierarchy => a.target_side == TargetSide::YesHierarchy,
        };
        let q6 = match self.q6 {
            Q6Pattern::Only(v) => a.score_type == v,
            Q6Pattern::Trainable => a.score_type != ScoreAnswer::Nominal,
            Q6Pattern::TrainableExceptOrdinal => {
                !matches!(a.score_type, ScoreAnswer::Nominal | ScoreAnswer::Ordinal)
            }
        };
        self.q1 == a.novel_instances
            && self.q2 == a.novel_targets
            && self.q3 == a.instance_side
            && q4
            && self.q5 == a.fully_observed
            && q6
    }
}

fn matching_rule(a: &QuestionnaireAnswers) -> Option<SettingLabel> {
    let mut hits = RULES.iter().filter(|r| r.matches(a));
    let first = hits.next()?;
    debug_assert!(hits.next().is_none(), "overlapping rules for {a}");
    Some(first.label)
}

/// Picks the problem setting for a complete set of answers.
///
/// Generalizing to novel instances (targets) requires side information for
/// instances (targets); such requests are rejected before the table is
/// consulted. A fully observed matrix that matches no row is retried as a
/// partially observed one.
pub fn select_setting(a: &QuestionnaireAnswers) -> Result<MtpSetting, SelectorError> {
    let unsupported = |reason: String| SelectorError::UnsupportedCombination {
        answers: *a,
        reason,
    };

    if a.novel_instances && !a.instance_side {
        return Err(unsupported(
            "generalizing to novel instances requires side information for the instances".into(),
        ));
    }
    if a.novel_targets && a.target_side == TargetSide::No {
        return Err(unsupported(
            "generalizing to novel targets requires side information for the targets".into(),
        ));
    }

    if let Some(label) = matching_rule(a) {
        return Ok(MtpSetting {
            label,
            default_validation_setting: label.default_validation_setting(),
            relaxed_fully_observed: false,
        });
    }
    if a.fully_observed && a.score_type != ScoreAnswer::Any {
        let relaxed = QuestionnaireAnswers {
            fully_observed: false,
            ..*a
        };
        if let Some(label) = matching_rule(&relaxed) {
            return Ok(MtpSetting {
                label,
                default_validation_setting: label.default_validation_setting(),
                relaxed_fully_observed: true,
            });
        }
    }

    let reason = if a.score_type == ScoreAnswer::Nominal {
        "nominal scores are only supported for fully observed multi-dimensional classification without target side information"
            .to_string()
    } else if a.score_type == ScoreAnswer::Any {
        "this combination needs a concrete score type".to_string()
    } else {
        "no problem setting is defined for this combination of answers".to_string()
    };
    Err(unsupported(reason))
}

/// Every concrete answer tuple (Q4 with three values, Q6 with four) and its outcome.
pub fn enumerate_rules() -> Vec<(QuestionnaireAnswers, Result<MtpSetting, SelectorError>)> {
    let bools = [true, false];
    let sides = [TargetSide::No, TargetSide::Yes, TargetSide::YesHierarchy];
    let mut out = Vec::with_capacity(192);
    for q1 in bools {
        for q2 in bools {
            for q3 in bools {
                for q4 in sides {
                    for q5 in bools {
                        for q6 in ScoreAnswer::CONCRETE {
                            let a = QuestionnaireAnswers::new(q1, q2, q3, q4, q5, q6);
                            out.push((a, select_setting(&a)));
                        }
                    }
                }
            }
        }
    }
    out
}
