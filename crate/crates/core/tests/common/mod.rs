//! Reference implementations and generators shared by the integration
//! tests and the acceptance run. Everything here is written from the
//! contracts, not from the library code, and is deliberately naive.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;

use kgtriage_core::diagnosis::{
    AgentResult, DiagnosisOutcome, DiagnosticQuery, Hop, OutcomeKind, ReferralDecision, ReferralReason,
    ScoredDiagnosis, SpecialistRule, TraceEvent, TransferEnvelope,
};
use kgtriage_core::curation::{apply, DeltaSource, ReviewQueue, ReviewState, Verdict};
use kgtriage_core::ingestion::Lexicon;
use kgtriage_core::kg::{Category, Entity, KnowledgeGraph, Predicate, Provenance, RelationTriple, Specialty, Status};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const CONSULTANTS: [Specialty; 4] = [
    Specialty::Cardiology,
    Specialty::Neurology,
    Specialty::Endocrinology,
    Specialty::Rheumatology,
];

pub fn specialty_name(s: Specialty) -> &'static str {
    match s {
        Specialty::General => "general",
        Specialty::Cardiology => "cardiology",
        Specialty::Neurology => "neurology",
        Specialty::Endocrinology => "endocrinology",
        Specialty::Rheumatology => "rheumatology",
    }
}

// ---------------------------------------------------------------- referral

/// The escalation predicate: refer when the GP is unsure or the diagnosis
/// belongs to a specialist.
pub fn referral_predicate(confidence: f64, tau: f64, in_specialist_set: bool) -> bool {
    confidence < tau || in_specialist_set
}

// ------------------------------------------------------------- aggregation

/// `P(z) = Σ_i w_i · P_i(z)`, missing entries count as zero. Returned in
/// candidate id order.
pub fn dot_product(results: &[Vec<(String, f64)>], weights: &[f64]) -> BTreeMap<String, f64> {
    let mut ids = BTreeSet::new();
    for agent in results {
        for (id, _) in agent {
            ids.insert(id.clone());
        }
    }
    let mut out = BTreeMap::new();
    for id in ids {
        let mut total = 0.0;
        for (agent, w) in results.iter().zip(weights) {
            let p = agent.iter().find(|(z, _)| *z == id).map(|(_, c)| *c).unwrap_or(0.0);
            total += w * p;
        }
        out.insert(id, total);
    }
    out
}

/// Arithmetic mean per candidate: sum in agent order, divided by `n`.
pub fn mean(results: &[Vec<(String, f64)>]) -> BTreeMap<String, f64> {
    let mut ids = BTreeSet::new();
    for agent in results {
        for (id, _) in agent {
            ids.insert(id.clone());
        }
    }
    let n = results.len() as f64;
    ids.into_iter()
        .map(|id| {
            let mut sum = 0.0;
            for agent in results {
                sum += agent.iter().find(|(z, _)| *z == id).map(|(_, c)| *c).unwrap_or(0.0);
            }
            (id, sum / n)
        })
        .collect()
}

/// Highest score; on equal scores the smaller id.
pub fn argmax(scores: &BTreeMap<String, f64>) -> Option<(String, f64)> {
    let mut best: Option<(String, f64)> = None;
    // ids come in ascending order, so strict `>` keeps the smallest on ties
    for (id, p) in scores {
        if best.as_ref().is_none_or(|(_, b)| *p > *b) {
            best = Some((id.clone(), *p));
        }
    }
    best
}

pub fn random_instance(r: &mut Rng8) -> (Vec<Vec<(String, f64)>>, Vec<f64>) {
    let n = r.gen_range(1..=6);
    let pool: Vec<String> = (0..8).map(|i| format!("dx-{i}")).collect();
    let results = (0..n)
        .map(|_| {
            let k = r.gen_range(0..=pool.len());
            let mut ids: Vec<&String> = pool.choose_multiple(r, k).collect();
            ids.sort();
            ids.into_iter().map(|id| (id.clone(), r.gen::<f64>())).collect()
        })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / sum).collect();
    (results, weights)
}

pub fn to_scored(results: &[Vec<(String, f64)>]) -> Vec<Vec<ScoredDiagnosis>> {
    results
        .iter()
        .map(|a| a.iter().map(|(id, c)| ScoredDiagnosis::new(id.clone(), *c)).collect())
        .collect()
}

// ------------------------------------------------------- entity extraction

fn is_word(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

/// Enumerates every lexicon occurrence on word boundaries, then keeps the
/// longest match at each leftmost free position.
pub fn brute_force_mentions(text: &str, lexicon: &Lexicon) -> Vec<(usize, usize, String)> {
    let surfaces: BTreeMap<String, String> =
        lexicon.iter().map(|(s, e)| (s.to_string(), e.label.clone())).collect();
    let longest = surfaces.keys().map(|s| s.chars().count()).max().unwrap_or(0);
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();

    let mut all = Vec::new();
    for (a, &start) in bounds.iter().enumerate() {
        if is_word(text[..start].chars().next_back()) {
            continue;
        }
        for &end in bounds.iter().skip(a + 1).take(longest) {
            if is_word(text[end..].chars().next()) {
                continue;
            }
            let folded: String = text[start..end].chars().flat_map(char::to_lowercase).collect();
            if let Some(label) = surfaces.get(&folded) {
                all.push((start, end, label.clone()));
            }
        }
    }
    all.sort_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)));
    let mut chosen: Vec<(usize, usize, String)> = Vec::new();
    for m in all {
        if chosen.last().is_none_or(|last| m.0 >= last.1) {
            chosen.push(m);
        }
    }
    chosen
}

const WORDS: &[&str] = &[
    "heart", "failure", "attack", "type", "2", "diabetes", "joint", "pain", "swelling", "chest", "fever",
    "rash", "migraine", "aura", "gout", "lupus", "acute", "chronic", "stiffness", "morning", "back", "renal",
    "kidney", "disease", "thyroid", "nodule", "angina", "pectoris", "blood", "pressure", "high", "low",
    "sugar", "vision", "blurred", "tremor", "rest", "weight", "loss", "gain", "fatigue", "cold", "cough",
];

const FILLER: &[&str] = &[
    "the", "patient", "reports", "with", "and", "heartburn", "painful", "goutish", "pre-diabetes", "über",
    "café", "noted", "since", "Monday", "x2", "of", "no", "mild", "severe", "diabetes2",
];

/// 50 distinct surfaces, including multiword forms whose prefixes are also
/// entries so that longest-match choices matter.
pub fn random_lexicon(r: &mut Rng8, size: usize) -> Lexicon {
    let mut lexicon = Lexicon::new();
    let cats = [Category::Disease, Category::Symptom, Category::Drug, Category::RiskFactor];
    while lexicon.len() < size {
        let n = r.gen_range(1..=3);
        let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(r).unwrap()).collect();
        let surface = words.join(" ");
        let label: String = words
            .iter()
            .map(|w| {
                let mut c = w.chars();
                c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
            })
            .collect::<Vec<String>>()
            .join(" ");
        lexicon.insert(&surface, &label, *cats.choose(r).unwrap(), Specialty::General);
    }
    lexicon
}

fn random_case(r: &mut Rng8, s: &str) -> String {
    match r.gen_range(0..3) {
        0 => s.to_string(),
        1 => s.to_uppercase(),
        _ => s.chars().map(|c| if r.gen_bool(0.5) { c.to_ascii_uppercase() } else { c }).collect(),
    }
}

pub fn random_chunk_text(r: &mut Rng8, lexicon: &Lexicon) -> String {
    let surfaces: Vec<&str> = lexicon.iter().map(|(s, _)| s).collect();
    let seps = [" ", " ", " ", ", ", ". ", "-", "\n", "; ", "/"];
    let n = r.gen_range(0..40);
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push_str(seps.choose(r).unwrap());
        }
        let piece = match r.gen_range(0..10) {
            0..=3 => surfaces.choose(r).unwrap().to_string(),
            4..=6 => WORDS.choose(r).unwrap().to_string(),
            _ => FILLER.choose(r).unwrap().to_string(),
        };
        out.push_str(&random_case(r, &piece));
    }
    out
}

// ------------------------------------------------------------ segmentation

/// Byte ranges of the chunks the boundary-preference rule produces: within
/// each window of `budget` chars, split before the last word that follows a
/// paragraph break, else a sentence end, else any whitespace, else cut hard.
pub fn reference_segments(text: &str, budget: usize) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte = |ci: usize| if ci == n { text.len() } else { chars[ci].0 };
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        if n - start <= budget {
            out.push((byte(start), text.len()));
            break;
        }
        let limit = start + budget;
        let mut best: Option<(u8, usize)> = None;
        for p in start + 1..=limit {
            if chars[p].1.is_whitespace() || !chars[p - 1].1.is_whitespace() {
                continue;
            }
            let mut q = p - 1;
            while q > start && chars[q].1.is_whitespace() {
                q -= 1;
            }
            if chars[q].1.is_whitespace() {
                continue;
            }
            let newlines = chars[q + 1..p].iter().filter(|(_, c)| *c == '\n').count();
            let class = if newlines >= 2 {
                2
            } else if matches!(chars[q].1, '.' | '!' | '?') {
                1
            } else {
                0
            };
            if best.is_none_or(|(b, _)| class >= b) {
                best = Some((class, p));
            }
        }
        let end = best.map_or(limit, |(_, p)| p);
        out.push((byte(start), byte(end)));
        start = end;
    }
    out
}

/// Mixed prose: words, sentence ends, line and paragraph breaks, the odd
/// multibyte word and the odd very long token.
pub fn random_document_text(r: &mut Rng8, max_chars: usize) -> String {
    let target = r.gen_range(0..=max_chars);
    let words = ["gout", "flare", "résumé", "naïve", "日本語", "x", "joint", "pain", "a", "morning", "ü"];
    let seps = [" ", " ", " ", " ", ". ", "! ", "? ", "\n", "\n\n", "\n \n\n", "\t", ", ", ".\n\n", "  "];
    let mut out = String::new();
    while out.chars().count() < target {
        if r.gen_ratio(1, 60) {
            let len = r.gen_range(50..400);
            out.extend(std::iter::repeat_n('w', len));
        } else {
            out.push_str(words.choose(r).unwrap());
        }
        out.push_str(seps.choose(r).unwrap());
    }
    out.chars().take(target).collect()
}

pub fn random_budget(r: &mut Rng8) -> usize {
    match r.gen_range(0..5) {
        0 => r.gen_range(1..10),
        1 => r.gen_range(10..100),
        2 => 1000,
        _ => r.gen_range(100..2500),
    }
}

// --------------------------------------------------------------- diagnosis

/// Plain description of a disease/symptom graph.
#[derive(Debug, Clone)]
pub struct DiseaseTable {
    pub diseases: Vec<(String, Specialty, BTreeSet<String>)>,
    pub symptoms: Vec<String>,
}

impl DiseaseTable {
    pub fn graph(&self) -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        for s in &self.symptoms {
            g.upsert_entity(s, Category::Symptom, Specialty::General, [] as [&str; 0]).unwrap();
        }
        for (d, spec, syms) in &self.diseases {
            g.upsert_entity(d, Category::Disease, *spec, [] as [&str; 0]).unwrap();
            for s in syms {
                g.add_relation(d, Predicate::HasSymptom, s, Provenance::Seed, Status::Approved, None).unwrap();
            }
        }
        g
    }

    pub fn specialty(&self, id: &str) -> Specialty {
        self.diseases.iter().find(|d| d.0 == id).map_or(Specialty::General, |d| d.1)
    }
}

/// 12 diseases over 40 symptoms: two general, the rest spread over the four
/// consultant specialties. Symptoms `sym-01`..`sym-10` carry most edges.
pub fn seeded_table(seed: u64) -> DiseaseTable {
    let mut r = rng(seed);
    let symptoms: Vec<String> = (1..=40).map(|i| format!("sym-{i:02}")).collect();
    let specialties = [
        Specialty::General,
        Specialty::General,
        Specialty::Cardiology,
        Specialty::Cardiology,
        Specialty::Cardiology,
        Specialty::Neurology,
        Specialty::Neurology,
        Specialty::Neurology,
        Specialty::Endocrinology,
        Specialty::Endocrinology,
        Specialty::Rheumatology,
        Specialty::Rheumatology,
    ];
    let diseases = specialties
        .iter()
        .enumerate()
        .map(|(i, &spec)| {
            let mut syms: BTreeSet<String> = BTreeSet::new();
            let core = r.gen_range(2..=3);
            while syms.len() < core {
                syms.insert(symptoms[r.gen_range(0..10)].clone());
            }
            if i % 3 != 0 {
                let extra = r.gen_range(1..=2);
                while syms.len() < core + extra {
                    syms.insert(symptoms[r.gen_range(10..40)].clone());
                }
            }
            (format!("disease-{i:02}"), spec, syms)
        })
        .collect();
    DiseaseTable { diseases, symptoms }
}

fn rank(mut v: Vec<ScoredDiagnosis>, top_k: usize) -> Vec<ScoredDiagnosis> {
    v.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap()
            .then_with(|| a.diagnosis_id.cmp(&b.diagnosis_id))
    });
    v.truncate(top_k);
    v
}

fn overlap(query: &BTreeSet<String>, own: &BTreeSet<String>) -> f64 {
    if own.is_empty() {
        0.0
    } else {
        own.intersection(query).count() as f64 / own.len() as f64
    }
}

/// Reference for the GP -> consultant protocol with the standard four
/// consultants and uniform aggregation: score every disease, apply the
/// referral rule, score the targeted domains, average.
pub fn reference_diagnose(
    table: &DiseaseTable,
    query: &DiagnosticQuery,
    tau: f64,
    top_k: usize,
    rule: SpecialistRule,
    specialist_ids: &BTreeSet<String>,
) -> DiagnosisOutcome {
    let score = |domain: Option<Specialty>| {
        let all = table
            .diseases
            .iter()
            .filter(|(_, s, _)| domain.is_none_or(|d| d == *s))
            .map(|(id, _, own)| ScoredDiagnosis::new(id.clone(), overlap(&query.symptom_ids, own)))
            .collect();
        rank(all, top_k)
    };
    let gp = score(None);
    let top = gp[0].clone();
    let mut trace = vec![TraceEvent::GpScored { top: Some(top.clone()) }];

    let in_xs = match rule {
        SpecialistRule::ExplicitList => specialist_ids.contains(&top.diagnosis_id),
        SpecialistRule::SpecialtyNotGeneral => table.specialty(&top.diagnosis_id) != Specialty::General,
    };
    let decision = if top.confidence < tau {
        let contending: BTreeSet<Specialty> = gp
            .iter()
            .filter(|d| d.confidence > 0.0)
            .map(|d| table.specialty(&d.diagnosis_id))
            .collect();
        let targets = if contending.len() == 1 && !contending.contains(&Specialty::General) {
            contending.into_iter().collect()
        } else {
            CONSULTANTS.to_vec()
        };
        ReferralDecision { referral: 1, reason: ReferralReason::BelowThreshold, target_specialties: targets }
    } else if in_xs {
        ReferralDecision {
            referral: 1,
            reason: ReferralReason::SpecialistDiagnosis,
            target_specialties: vec![table.specialty(&top.diagnosis_id)],
        }
    } else {
        ReferralDecision { referral: 0, reason: ReferralReason::None, target_specialties: vec![] }
    };
    assert_eq!(decision.referral == 1, referral_predicate(top.confidence, tau, in_xs));
    trace.push(TraceEvent::ReferralDecided { decision: decision.clone() });

    let mut outcome = DiagnosisOutcome {
        query_id: query.query_id.clone(),
        kind: OutcomeKind::GpDirect,
        final_diagnosis: top.clone(),
        gp_results: gp.clone(),
        per_agent: vec![],
        decision: decision.clone(),
        low_confidence: false,
        envelope: None,
        trace,
    };
    if decision.referral == 0 {
        return outcome;
    }

    let missing: Vec<Specialty> =
        decision.target_specialties.iter().copied().filter(|s| !CONSULTANTS.contains(s)).collect();
    for s in &missing {
        outcome.trace.push(TraceEvent::NoConsultantForSpecialty { specialty: *s });
    }
    let consulted: Vec<Specialty> =
        if missing.is_empty() { decision.target_specialties.clone() } else { CONSULTANTS.to_vec() };

    let mut hops = Vec::new();
    for s in &consulted {
        let to = specialty_name(*s).to_string();
        hops.push(Hop { seq: hops.len(), from: "gp".into(), to: to.clone() });
        outcome.trace.push(TraceEvent::Transferred { from: "gp".into(), to });
    }
    outcome.envelope = Some(TransferEnvelope {
        query: query.clone(),
        symptom_ids: query.symptom_ids.clone(),
        gp_candidates: gp.clone(),
        trace: hops,
    });
    for s in &consulted {
        let results = score(Some(*s));
        outcome.trace.push(TraceEvent::ConsultantScored {
            agent_id: specialty_name(*s).into(),
            top: results.first().cloned(),
        });
        outcome.per_agent.push(AgentResult { agent_id: specialty_name(*s).into(), specialty: *s, results });
    }

    let single = decision.target_specialties.len() == 1 && missing.is_empty();
    let best = if single {
        outcome.kind = OutcomeKind::ConsultantSingle;
        outcome.per_agent[0].results.first().cloned()
    } else {
        outcome.kind = OutcomeKind::ConsultantAggregated;
        let n = consulted.len();
        outcome.trace.push(TraceEvent::Aggregated {
            agents: consulted.iter().map(|s| specialty_name(*s).to_string()).collect(),
            weights: vec![1.0 / n as f64; n],
        });
        let lists: Vec<Vec<(String, f64)>> = outcome
            .per_agent
            .iter()
            .map(|a| a.results.iter().map(|d| (d.diagnosis_id.clone(), d.confidence)).collect())
            .collect();
        argmax(&mean(&lists)).map(|(id, p)| ScoredDiagnosis::new(id, p))
    };
    match best {
        Some(b) => outcome.final_diagnosis = b,
        None => {
            outcome.trace.push(TraceEvent::NoConsultantResults);
            outcome.final_diagnosis = top;
        }
    }
    outcome.low_confidence = outcome.final_diagnosis.confidence < tau;
    outcome
}

/// Every non-empty subset of `items` with at most `max` elements, smallest
/// subsets first.
pub fn subsets_up_to<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::new();
    let mut frontier: Vec<(usize, Vec<T>)> = vec![(0, Vec::new())];
    for _ in 0..max {
        let mut next = Vec::new();
        for (from, set) in &frontier {
            for (i, item) in items.iter().enumerate().skip(*from) {
                let mut s = set.clone();
                s.push(item.clone());
                next.push((i + 1, s));
            }
        }
        out.extend(next.iter().map(|(_, s)| s.clone()));
        frontier = next;
    }
    out
}

// ------------------------------------------------------------------ graphs

/// Random graph with mixed categories, aliases, predicates and statuses.
pub fn random_graph(r: &mut Rng8) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    let cats = [Category::Disease, Category::Symptom, Category::Drug, Category::RiskFactor, Category::Other];
    let specs = [
        Specialty::General,
        Specialty::Cardiology,
        Specialty::Neurology,
        Specialty::Endocrinology,
        Specialty::Rheumatology,
    ];
    let mut ids = Vec::new();
    for i in 0..r.gen_range(0..25) {
        let label = format!("{} {i}", WORDS.choose(r).unwrap());
        let aliases: Vec<String> = (0..r.gen_range(0..3)).map(|j| format!("alias {i} {j}")).collect();
        let id = g
            .upsert_entity(&label, *cats.choose(r).unwrap(), *specs.choose(r).unwrap(), &aliases)
            .unwrap();
        ids.push(id);
    }
    if ids.len() < 2 {
        return g;
    }
    let preds = [
        Predicate::HasSymptom,
        Predicate::Treats,
        Predicate::Causes,
        Predicate::ComorbidWith,
        Predicate::ReducesRiskOf,
        Predicate::Other("linked-to".into()),
    ];
    let statuses = [Status::Extracted, Status::PendingReview, Status::Approved, Status::Rejected];
    for i in 0..r.gen_range(0..40) {
        let s = ids.choose(r).unwrap().clone();
        let o = ids.choose(r).unwrap().clone();
        if s == o {
            continue;
        }
        let chunk = r.gen_bool(0.5).then(|| format!("doc-{}#{i}", r.gen_range(0..5)));
        let _ = g.add_relation(
            &s,
            preds.choose(r).unwrap().clone(),
            &o,
            Provenance::LexiconExtractor,
            *statuses.choose(r).unwrap(),
            chunk,
        );
    }
    g
}

/// Approved triples of `donor` (every live one, relabelled approved) plus the
/// entities they reference.
pub fn approved_subset(donor: &KnowledgeGraph) -> (Vec<Entity>, Vec<RelationTriple>) {
    let triples: Vec<RelationTriple> = donor
        .relations()
        .filter(|r| r.status.is_live())
        .map(|r| RelationTriple { status: Status::Approved, ..r.clone() })
        .collect();
    let ids: BTreeSet<&String> = triples.iter().flat_map(|t| [&t.subject, &t.object]).collect();
    let entities = donor.entities().filter(|e| ids.contains(&e.id)).cloned().collect();
    (entities, triples)
}

// ---------------------------------------------------------------- curation

/// Gout with three approved symptoms plus `n` candidate edges awaiting review.
pub fn review_fixture(n: usize) -> (KnowledgeGraph, Vec<RelationTriple>) {
    let mut g = KnowledgeGraph::new();
    g.upsert_entity("Gout", Category::Disease, Specialty::Rheumatology, [] as [&str; 0]).unwrap();
    for s in ["joint pain", "swelling", "fever"] {
        let id = g.upsert_entity(s, Category::Symptom, Specialty::General, [] as [&str; 0]).unwrap();
        g.add_relation("gout", Predicate::HasSymptom, &id, Provenance::Seed, Status::Approved, None).unwrap();
    }
    let mut triples = Vec::new();
    for i in 0..n {
        let id = g
            .upsert_entity(&format!("candidate {i}"), Category::Symptom, Specialty::General, [] as [&str; 0])
            .unwrap();
        let rel = g.add_relation("gout", Predicate::HasSymptom, &id, Provenance::Augmenter, Status::PendingReview, None).unwrap();
        triples.push(g.relation(&rel).unwrap().clone());
    }
    (g, triples)
}

/// Plays a random enqueue/approve/reject/delta history and checks that the
/// deltas carry every approved triple exactly once and nothing else.
/// Returns the number of approvals seen.
pub fn check_delta_partition(seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    let (mut g, triples) = review_fixture(12);
    let mut q = ReviewQueue::new();
    let mut deltas = Vec::new();
    for t in 0..r.gen_range(1..60) {
        let now = chrono::DateTime::from_timestamp(1_700_000_000 + t, 0).unwrap();
        let i = r.gen_range(0..triples.len());
        match r.gen_range(0..10) {
            0..=2 => {
                q.enqueue(&triples[i..=i], "ingest", now);
            }
            k @ 3..=7 => {
                let verdict = if k <= 5 { Verdict::Approve } else { Verdict::Reject };
                if let Some(item) = q.item_for_triple(&triples[i].id).cloned() {
                    let _ = q.review(&item.item_id, verdict, "dr", item.revision, None, now);
                }
            }
            _ => {
                let d = q.next_delta(&g, DeltaSource::ExpertReview).map_err(|e| e.to_string())?;
                g = apply(&d, &g).map_err(|e| e.to_string())?;
                deltas.push(d);
            }
        }
    }
    deltas.push(q.next_delta(&g, DeltaSource::ExpertReview).map_err(|e| e.to_string())?);

    let approved: BTreeSet<String> = q
        .items()
        .filter(|i| i.state == ReviewState::Approved)
        .map(|i| i.triple.id.clone())
        .collect();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for t in deltas.iter().flat_map(|d| &d.approved_triples) {
        if t.status != Status::Approved {
            return Err(format!("{} carried as {:?}", t.id, t.status));
        }
        *seen.entry(t.id.clone()).or_default() += 1;
    }
    if let Some((id, n)) = seen.iter().find(|(_, n)| **n != 1) {
        return Err(format!("{id} carried {n} times"));
    }
    if seen.keys().cloned().collect::<BTreeSet<_>>() != approved {
        return Err("deltas and approvals differ".into());
    }
    g.check_invariants().map_err(|e| e.to_string())?;
    Ok(approved.len())
}

// -------------------------------------------------------------- http stub

/// Serves `body` with status 200 to every request, `hits` times.
pub fn stub_server(body: &'static str, hits: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().take(hits) {
            let mut stream = stream.unwrap();
            let mut buf = [0u8; 8192];
            let mut seen = Vec::new();
            // read until the end of the headers and the declared body
            loop {
                let n = stream.read(&mut buf).unwrap();
                seen.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&seen);
                if let Some(head_end) = text.find("\r\n\r\n") {
                    let len = text[..head_end]
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                        .unwrap_or(0);
                    if seen.len() >= head_end + 4 + len {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            let reply = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    format!("http://{addr}/")
}

