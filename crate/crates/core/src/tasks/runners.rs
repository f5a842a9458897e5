use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use rayon::prelude::*;

use super::data::{DataRoot, Splits};
use super::linking::{argmax, predict_with_prior, MAX_CANDIDATES};
use super::records::{
    LinkingRecord, PairRecord, RelationRecord, SimilarityRecord, StatementRecord, TypingRecord,
};
use super::report::TaskReport;
use super::Task;
use crate::embed_io::EmbeddingSet;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, cosine, multilabel_f1, spearman};
use crate::probe::{
    mix_layers, train_linear, CandidateGroup, DevSet, MixMode, MixSetup, MixWeights, ProbeInputs,
    Targets, TrainConfig, TrainedProbe, TuneObjective,
};
use crate::types::{PairGroup, TypedInstance};

/// Which encoder layers a probe sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayerSelection {
    /// All layers, combined by trainable mixing weights.
    #[default]
    Mixed,
    /// One layer on its own.
    Single(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSettings {
    pub train: TrainConfig,
    pub mix_mode: MixMode,
    pub layer: LayerSelection,
    pub tune: TuneObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairTask {
    Cap,
    Cerp,
}

const PRIOR_SUM_TOLERANCE: f64 = 1e-9;
const RARE_CANDIDATES: usize = 4;

/// The embedding set a run actually sees, with its mixing setup.
struct View<'a> {
    set: Cow<'a, EmbeddingSet>,
    mix: MixSetup,
    layer: Option<usize>,
}

fn view<'a>(set: &'a EmbeddingSet, layer: LayerSelection, mode: MixMode) -> Result<View<'a>> {
    Ok(match layer {
        LayerSelection::Single(l) => View {
            set: Cow::Owned(set.select_layer(l)?),
            mix: MixSetup::fixed(MixWeights::initial(MixMode::Unnormalized, 1)),
            layer: Some(l),
        },
        LayerSelection::Mixed => View {
            set: Cow::Borrowed(set),
            mix: MixSetup::trainable(MixWeights::initial(mode, set.n_layers())),
            layer: None,
        },
    })
}

struct Keys<'a>(HashMap<&'a str, usize>);

impl Keys<'_> {
    fn row(&self, key: &str) -> Result<usize> {
        self.0
            .get(key)
            .copied()
            .ok_or_else(|| Error::Data(format!("embeddings lack key {key}")))
    }
}

fn fit(
    train: &ProbeInputs<'_>,
    train_targets: &Targets,
    valid: Option<(&ProbeInputs<'_>, &Targets)>,
    view: &View<'_>,
    cfg: &TrainConfig,
) -> Result<TrainedProbe> {
    let dev = valid
        .filter(|(inputs, _)| !inputs.is_empty())
        .map(|(inputs, targets)| DevSet { inputs, targets });
    train_linear(train, train_targets, cfg, &view.mix, dev)
}

fn binary_accuracy(probe: &TrainedProbe, inputs: &ProbeInputs<'_>, labels: &[bool]) -> Result<f64> {
    let predicted: Vec<bool> = probe
        .predict_proba(inputs)?
        .iter()
        .map(|p| p[0] >= 0.5)
        .collect();
    accuracy(&predicted, labels)
}

fn report_base(
    task: &str,
    metric: &str,
    value: f64,
    view: &View<'_>,
    settings: &RunSettings,
) -> TaskReport {
    let mut r = TaskReport::new(task, metric, value, settings.train.seed);
    r.layer = view.layer;
    r
}

/// CAP (mean of the `same` and `next` group accuracies) or CERP (accuracy),
/// both over pair features of the two mentions.
pub fn run_pair_classification(
    task: PairTask,
    data: &Splits<PairRecord>,
    embeddings: &EmbeddingSet,
    settings: &RunSettings,
) -> Result<TaskReport> {
    let view = view(embeddings, settings.layer, settings.mix_mode)?;
    let keys = Keys(view.set.index());
    let groups = match task {
        PairTask::Cap => {
            if let Some(r) = data.all().find(|r| r.group.is_none()) {
                return Err(Error::Data(format!(
                    "cap instance {} has no group tag",
                    r.id
                )));
            }
            vec![Some(PairGroup::Same), Some(PairGroup::Next)]
        }
        PairTask::Cerp => vec![None],
    };
    let build = |records: &[PairRecord],
                 group: Option<PairGroup>|
     -> Result<(ProbeInputs<'_>, Vec<bool>)> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for r in records
            .iter()
            .filter(|r| group.is_none() || r.group == group)
        {
            rows.push((
                keys.row(&format!("l:{}", r.id))?,
                keys.row(&format!("r:{}", r.id))?,
            ));
            labels.push(r.label == 1);
        }
        Ok((ProbeInputs::pair(&view.set, &view.set, rows), labels))
    };

    let mut components = Vec::new();
    let mut n_parameters = 0;
    let mut mix = None;
    for group in groups {
        let name = group.map_or("all", PairGroup::as_str);
        let (train, train_y) = build(&data.train, group)?;
        let (valid, valid_y) = build(&data.valid, group)?;
        let (test, test_y) = build(&data.test, group)?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::Data(format!(
                "pair task group {name} has no train or test instances"
            )));
        }
        let valid_t = Targets::Binary(valid_y);
        let probe = fit(
            &train,
            &Targets::Binary(train_y),
            Some((&valid, &valid_t)),
            &view,
            &settings.train,
        )?;
        components.push((
            name.to_owned(),
            100.0 * binary_accuracy(&probe, &test, &test_y)?,
        ));
        n_parameters += probe.n_parameters();
        mix.get_or_insert(probe.mix);
    }

    let (task_name, value) = match task {
        PairTask::Cap => (
            "cap",
            components.iter().map(|c| c.1).sum::<f64>() / components.len() as f64,
        ),
        PairTask::Cerp => ("cerp", components[0].1),
    };
    let mut report = report_base(task_name, "accuracy", value, &view, settings);
    if task == PairTask::Cap {
        report.components = components;
    }
    report.n_parameters = n_parameters;
    report.mix = mix;
    Ok(report)
}

/// EFP: accuracy of a probe on the claim representation itself.
pub fn run_statement_classification(
    data: &Splits<StatementRecord>,
    embeddings: &EmbeddingSet,
    settings: &RunSettings,
) -> Result<TaskReport> {
    let view = view(embeddings, settings.layer, settings.mix_mode)?;
    let keys = Keys(view.set.index());
    let build = |records: &[StatementRecord]| -> Result<(ProbeInputs<'_>, Vec<bool>)> {
        let rows = records
            .iter()
            .map(|r| keys.row(&format!("s:{}", r.id)))
            .collect::<Result<Vec<_>>>()?;
        let labels = records.iter().map(|r| r.label == 1).collect();
        Ok((ProbeInputs::single(&view.set, rows), labels))
    };
    let (train, train_y) = build(&data.train)?;
    let (valid, valid_y) = build(&data.valid)?;
    let (test, test_y) = build(&data.test)?;
    let valid_t = Targets::Binary(valid_y);
    let probe = fit(
        &train,
        &Targets::Binary(train_y),
        Some((&valid, &valid_t)),
        &view,
        &settings.train,
    )?;
    let mut report = report_base(
        "efp",
        "accuracy",
        100.0 * binary_accuracy(&probe, &test, &test_y)?,
        &view,
        settings,
    );
    report.n_parameters = probe.n_parameters();
    report.mix = Some(probe.mix);
    Ok(report)
}

/// ET: multilabel probe with per-type thresholds tuned on valid; macro F1.
///
/// Output units exist only for types seen in train. Other gold types can
/// never be predicted but still count against recall.
pub fn run_typing(
    data: &Splits<TypingRecord>,
    embeddings: &EmbeddingSet,
    settings: &RunSettings,
) -> Result<TaskReport> {
    for r in data.all() {
        TypedInstance::new(r.mention()?, r.label.iter().copied())?;
    }
    if data.valid.is_empty() {
        return Err(Error::Data(
            "et needs a valid split for threshold tuning".into(),
        ));
    }
    let view = view(embeddings, settings.layer, settings.mix_mode)?;
    let keys = Keys(view.set.index());
    let columns: Vec<u32> = data
        .train
        .iter()
        .flat_map(|r| r.label.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let column_of: HashMap<u32, usize> = columns.iter().enumerate().map(|(k, &t)| (t, k)).collect();

    let build =
        |records: &[TypingRecord]| -> Result<(ProbeInputs<'_>, Vec<Vec<usize>>, Vec<usize>)> {
            let rows = records
                .iter()
                .map(|r| keys.row(&format!("m:{}", r.id)))
                .collect::<Result<Vec<_>>>()?;
            let mut labels = Vec::with_capacity(records.len());
            let mut unscored = Vec::with_capacity(records.len());
            for r in records {
                let gold: BTreeSet<u32> = r.label.iter().copied().collect();
                let cols: Vec<usize> = gold
                    .iter()
                    .filter_map(|t| column_of.get(t).copied())
                    .collect();
                unscored.push(gold.len() - cols.len());
                labels.push(cols);
            }
            Ok((ProbeInputs::single(&view.set, rows), labels, unscored))
        };
    let (train, train_y, _) = build(&data.train)?;
    let (valid, valid_y, valid_unscored) = build(&data.valid)?;
    let (test, _, _) = build(&data.test)?;
    let n_classes = columns.len();
    let valid_t = Targets::Multilabel {
        n_classes,
        labels: valid_y.clone(),
    };
    let probe = fit(
        &train,
        &Targets::Multilabel {
            n_classes,
            labels: train_y,
        },
        Some((&valid, &valid_t)),
        &view,
        &settings.train,
    )?;

    let valid_gold: Vec<BTreeSet<u32>> = valid_y
        .iter()
        .map(|c| c.iter().map(|&k| k as u32).collect())
        .collect();
    let valid_scores = probe.predict_proba(&valid)?;
    let thresholds = crate::probe::tune_thresholds_with_unscored(
        &valid_scores,
        &valid_gold,
        &valid_unscored,
        settings.tune,
    )?;
    let predicted: Vec<BTreeSet<u32>> = thresholds
        .apply(&probe.predict_proba(&test)?)
        .into_iter()
        .map(|cols| cols.into_iter().map(|k| columns[k as usize]).collect())
        .collect();
    let gold: Vec<BTreeSet<u32>> = data
        .test
        .iter()
        .map(|r| r.label.iter().copied().collect())
        .collect();
    let prf = multilabel_f1(&predicted, &gold)?;

    let mut report = report_base("et", "f1", 100.0 * prf.f1, &view, settings);
    report.n_parameters = probe.n_parameters();
    report.mix = Some(probe.mix);
    report.notes.push(format!(
        "precision {:.2}, recall {:.2}, {} of {} types seen in train",
        100.0 * prf.precision,
        100.0 * prf.recall,
        n_classes,
        crate::types::NUM_ENTITY_TYPES
    ));
    Ok(report)
}

/// ESR: per-subset Spearman (x 100) of description cosines against gold;
/// the headline is the mean over subsets. No parameters are trained.
///
/// Mixed runs average the layers with fixed uniform weights.
pub fn run_similarity(
    records: &[SimilarityRecord],
    embeddings: &EmbeddingSet,
    layer: LayerSelection,
) -> Result<TaskReport> {
    let (mixed, layer_label) = match layer {
        LayerSelection::Mixed => (
            mix_layers(embeddings, &MixWeights::uniform(embeddings.n_layers()))?,
            None,
        ),
        LayerSelection::Single(l) => {
            let single = embeddings.select_layer(l)?;
            (mix_layers(&single, &MixWeights::uniform(1))?, Some(l))
        }
    };
    let keys = Keys(embeddings.index());
    let mut subsets: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut excluded: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let a = keys.row(&format!("d:{}", r.entity1))?;
        let b = keys.row(&format!("d:{}", r.entity2))?;
        let entry = subsets.entry(r.subset.as_str()).or_default();
        match cosine(&mixed[a], &mixed[b]) {
            Some(c) => {
                entry.0.push(c);
                entry.1.push(r.score);
            }
            None => *excluded.entry(r.subset.as_str()).or_default() += 1,
        }
    }
    if subsets.is_empty() {
        return Err(Error::Data("esr has no pairs".into()));
    }
    let mut components = Vec::new();
    for (name, (pred, gold)) in &subsets {
        let rho = spearman(pred, gold)
            .map_err(|e| Error::UndefinedCorrelation(format!("esr subset {name}: {e}")))?;
        components.push(((*name).to_owned(), 100.0 * rho));
    }
    let value = components.iter().map(|c| c.1).sum::<f64>() / components.len() as f64;
    let mut report = TaskReport::new("esr", "spearman", value, 0);
    report.layer = layer_label;
    report.components = components;
    for (name, n) in excluded {
        warn!("esr subset {name}: {n} pairs with zero-norm embeddings excluded");
        report.notes.push(format!(
            "{name}: {n} pairs with zero-norm embeddings excluded"
        ));
    }
    Ok(report)
}

/// ERT: cross-entropy probe over pair features of the two descriptions.
pub fn run_pair_typing(
    data: &Splits<RelationRecord>,
    embeddings: &EmbeddingSet,
    settings: &RunSettings,
) -> Result<TaskReport> {
    let view = view(embeddings, settings.layer, settings.mix_mode)?;
    let keys = Keys(view.set.index());
    let classes: BTreeSet<usize> = data.train.iter().map(|r| r.relation).collect();
    let class_of: HashMap<usize, usize> =
        classes.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let build = |records: &[RelationRecord]| -> Result<(ProbeInputs<'_>, Vec<usize>)> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for r in records {
            rows.push((
                keys.row(&format!("d:{}", r.entity1))?,
                keys.row(&format!("d:{}", r.entity2))?,
            ));
            labels.push(*class_of.get(&r.relation).ok_or_else(|| {
                Error::Data(format!("{}: unknown relation id {}", r.id, r.relation))
            })?);
        }
        Ok((ProbeInputs::pair(&view.set, &view.set, rows), labels))
    };
    let (train, train_y) = build(&data.train)?;
    let (valid, valid_y) = build(&data.valid)?;
    let (test, test_y) = build(&data.test)?;
    let n_classes = classes.len();
    let valid_t = Targets::Multiclass {
        n_classes,
        labels: valid_y,
    };
    let probe = fit(
        &train,
        &Targets::Multiclass {
            n_classes,
            labels: train_y,
        },
        Some((&valid, &valid_t)),
        &view,
        &settings.train,
    )?;
    let predicted: Vec<usize> = probe
        .predict_proba(&test)?
        .into_iter()
        .map(argmax)
        .collect();
    let mut report = report_base(
        "ert",
        "accuracy",
        100.0 * accuracy(&predicted, &test_y)?,
        &view,
        settings,
    );
    report.n_parameters = probe.n_parameters();
    report.mix = Some(probe.mix);
    Ok(report)
}

fn validate_linking(r: &LinkingRecord) -> Result<usize> {
    if r.candidates.is_empty() || r.candidates.len() > MAX_CANDIDATES {
        return Err(Error::Data(format!(
            "{}: {} candidates",
            r.id,
            r.candidates.len()
        )));
    }
    let total: f64 = r.candidates.iter().map(|c| c.prior).sum();
    if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE {
        return Err(Error::Data(format!("{}: priors sum to {total}", r.id)));
    }
    r.candidates
        .iter()
        .position(|c| c.entity_id == r.gold)
        .ok_or_else(|| Error::Data(format!("{}: gold {} not among candidates", r.id, r.gold)))
}

/// Candidate rows of `records`, flattened, with one group per record.
fn linking_inputs<'a>(
    records: &[LinkingRecord],
    keys: &Keys<'_>,
    set: &'a EmbeddingSet,
) -> Result<(ProbeInputs<'a>, Vec<CandidateGroup>)> {
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for r in records {
        let gold = validate_linking(r)?;
        let m = keys.row(&format!("m:{}", r.id))?;
        groups.push(CandidateGroup {
            start: rows.len(),
            len: r.candidates.len(),
            gold,
        });
        for c in &r.candidates {
            rows.push((m, keys.row(&format!("d:{}", c.entity_id))?));
        }
    }
    Ok((ProbeInputs::pair(set, set, rows), groups))
}

fn binary_targets(groups: &[CandidateGroup]) -> Targets {
    Targets::Binary(
        groups
            .iter()
            .flat_map(|g| (0..g.len).map(move |k| k == g.gold))
            .collect(),
    )
}

/// Linking predictions: per record, `argmax prior + classifier[k]` with
/// ties to the lowest index. `classifier` holds one score per candidate.
pub fn predict_linking(records: &[LinkingRecord], classifier: &[Vec<f64>]) -> Vec<usize> {
    records
        .iter()
        .zip(classifier)
        .map(|(r, scores)| {
            let priors: Vec<f64> = r.candidates.iter().map(|c| c.prior).collect();
            predict_with_prior(&priors, scores)
        })
        .collect()
}

/// CoNLL: binary probe over every (mention, candidate) pair; prediction adds
/// the sigmoid score to the candidate prior.
pub fn run_linking_conll(
    data: &Splits<LinkingRecord>,
    embeddings: &EmbeddingSet,
    settings: &RunSettings,
) -> Result<TaskReport> {
    let view = view(embeddings, settings.layer, settings.mix_mode)?;
    let keys = Keys(view.set.index());
    let (train, train_groups) = linking_inputs(&data.train, &keys, &view.set)?;
    let (valid, valid_groups) = linking_inputs(&data.valid, &keys, &view.set)?;
    let (test, test_groups) = linking_inputs(&data.test, &keys, &view.set)?;
    let valid_t = binary_targets(&valid_groups);
    let probe = fit(
        &train,
        &binary_targets(&train_groups),
        Some((&valid, &valid_t)),
        &view,
        &settings.train,
    )?;

    let probs = probe.predict_proba(&test)?;
    let scores: Vec<Vec<f64>> = test_groups
        .iter()
        .map(|g| {
            probs[g.start..g.start + g.len]
                .iter()
                .map(|p| p[0])
                .collect()
        })
        .collect();
    let gold: Vec<usize> = test_groups.iter().map(|g| g.gold).collect();
    let predicted = predict_linking(&data.test, &scores);
    let zeros: Vec<Vec<f64>> = test_groups.iter().map(|g| vec![0.0; g.len]).collect();
    let prior_only = predict_linking(&data.test, &zeros);

    let mut report = report_base(
        "conll",
        "accuracy",
        100.0 * accuracy(&predicted, &gold)?,
        &view,
        settings,
    );
    report
        .components
        .push(("prior_only".into(), 100.0 * accuracy(&prior_only, &gold)?));
    report.n_parameters = probe.n_parameters();
    report.mix = Some(probe.mix);
    Ok(report)
}

/// Rare: softmax over exactly four candidate scores, cross-entropy trained.
pub fn run_candidate_selection(
    data: &Splits<LinkingRecord>,
    embeddings: &EmbeddingSet,
    settings: &RunSettings,
) -> Result<TaskReport> {
    if let Some(r) = data.all().find(|r| r.candidates.len() != RARE_CANDIDATES) {
        return Err(Error::Data(format!(
            "rare instance {} has {} candidates, expected {RARE_CANDIDATES}",
            r.id,
            r.candidates.len()
        )));
    }
    let view = view(embeddings, settings.layer, settings.mix_mode)?;
    let keys = Keys(view.set.index());
    let (train, train_groups) = linking_inputs(&data.train, &keys, &view.set)?;
    let (valid, valid_groups) = linking_inputs(&data.valid, &keys, &view.set)?;
    let (test, test_groups) = linking_inputs(&data.test, &keys, &view.set)?;
    let valid_t = Targets::Grouped(valid_groups);
    let probe = fit(
        &train,
        &Targets::Grouped(train_groups),
        Some((&valid, &valid_t)),
        &view,
        &settings.train,
    )?;

    let logits = probe.logits(&test)?;
    let predicted: Vec<usize> = test_groups
        .iter()
        .map(|g| argmax(logits[g.start..g.start + g.len].iter().map(|z| z[0])))
        .collect();
    let gold: Vec<usize> = test_groups.iter().map(|g| g.gold).collect();
    let mut report = report_base(
        "rare",
        "accuracy",
        100.0 * accuracy(&predicted, &gold)?,
        &view,
        settings,
    );
    report.n_parameters = probe.n_parameters();
    report.mix = Some(probe.mix);
    Ok(report)
}

/// NED headline: mean of the CoNLL and Rare accuracies.
pub fn ned_report(conll: &TaskReport, rare: &TaskReport) -> TaskReport {
    let mut report = TaskReport::new(
        "ned",
        "accuracy",
        (conll.value + rare.value) / 2.0,
        conll.seed,
    );
    report.layer = conll.layer;
    report.components = vec![("conll".into(), conll.value), ("rare".into(), rare.value)];
    report.components.extend(
        conll
            .components
            .iter()
            .map(|(n, v)| (format!("conll_{n}"), *v)),
    );
    report.n_parameters = conll.n_parameters + rare.n_parameters;
    report.mix = conll.mix.clone();
    report
}

fn embeddings_for(store: &BTreeMap<Task, EmbeddingSet>, task: Task) -> Result<&EmbeddingSet> {
    store
        .get(&task)
        .ok_or_else(|| Error::Data(format!("no embeddings supplied for {task}")))
}

/// Runs one task from a data directory. NED runs CoNLL and Rare.
pub fn run_task(
    task: Task,
    root: &DataRoot,
    store: &BTreeMap<Task, EmbeddingSet>,
    settings: &RunSettings,
) -> Result<TaskReport> {
    match task {
        Task::Cap | Task::Cerp => {
            let kind = if task == Task::Cap {
                PairTask::Cap
            } else {
                PairTask::Cerp
            };
            run_pair_classification(
                kind,
                &root.load(task)?,
                embeddings_for(store, task)?,
                settings,
            )
        }
        Task::Efp => {
            run_statement_classification(&root.load(task)?, embeddings_for(store, task)?, settings)
        }
        Task::Et => run_typing(&root.load(task)?, embeddings_for(store, task)?, settings),
        Task::Esr => {
            let data: Splits<SimilarityRecord> = root.load(task)?;
            let mut report =
                run_similarity(&data.test, embeddings_for(store, task)?, settings.layer)?;
            report.seed = settings.train.seed;
            Ok(report)
        }
        Task::Ert => run_pair_typing(&root.load(task)?, embeddings_for(store, task)?, settings),
        Task::Conll => run_linking_conll(&root.load(task)?, embeddings_for(store, task)?, settings),
        Task::Rare => {
            run_candidate_selection(&root.load(task)?, embeddings_for(store, task)?, settings)
        }
        Task::Ned => {
            let conll = run_task(Task::Conll, root, store, settings)?;
            let rare = run_task(Task::Rare, root, store, settings)?;
            Ok(ned_report(&conll, &rare))
        }
    }
}

/// One run per single layer, in layer order, followed by the mixed run.
pub fn run_per_layer(
    task: Task,
    root: &DataRoot,
    store: &BTreeMap<Task, EmbeddingSet>,
    settings: &RunSettings,
) -> Result<Vec<TaskReport>> {
    let probe_task = if task == Task::Ned { Task::Conll } else { task };
    let n_layers = embeddings_for(store, probe_task)?.n_layers();
    let mut selections: Vec<LayerSelection> = (0..n_layers).map(LayerSelection::Single).collect();
    selections.push(LayerSelection::Mixed);
    selections
        .into_par_iter()
        .map(|layer| {
            let s = RunSettings {
                layer,
                ..settings.clone()
            };
            run_task(task, root, store, &s)
        })
        .collect()
}
