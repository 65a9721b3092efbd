//! Acceptance criteria. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use regex::Regex;

use sciwrite_lint_core::config::Config;
use sciwrite_lint_core::eval::corpus::load_json;
use sciwrite_lint_core::eval::degrade::{run_matching_benchmark, MatchingFixture, Scenario};
use sciwrite_lint_core::eval::inject::{run_injection, InjectionKind, TexDocument};
use sciwrite_lint_core::finding::{check, Finding, Level};
use sciwrite_lint_core::identifiers::{ArxivId, Doi};
use sciwrite_lint_core::matching::DEFAULT_MATCH_THRESHOLD;
use sciwrite_lint_core::pipeline::run_check;
use sciwrite_lint_core::registry::replay::ReplayTransport;
use sciwrite_lint_core::registry::sim::SimulatedRegistry;
use sciwrite_lint_core::registry::transport::RecordingTransport;
use sciwrite_lint_core::registry::{ExternalId, RetractionKind, RetractionStatus};
use sciwrite_lint_core::reliability::{reliability, reliability_micros, ConsistencyCounts, ReliabilityBreakdown, VerificationTier};
use sciwrite_lint_core::render::render_structured;
use sciwrite_lint_core::score::{
    contribution, referencing_quality, score_manuscript, CitationPurpose, ContributionProfile, ReferenceAssessment,
};

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

// 1. Printed calibration rows: [score, emp, prog, unif, prob, sev].
const CALIBRATION: [(&str, [f64; 6]); 9] = [
    ("LIGO", [0.570, 0.59, 0.51, 0.75, 0.33, 0.66]),
    ("Reinhart-Rogoff", [0.553, 0.77, 0.33, 0.67, 0.33, 0.67]),
    ("Graphene", [0.536, 0.73, 0.80, 0.00, 0.25, 0.90]),
    ("Transformer", [0.512, 0.54, 0.36, 0.86, 0.25, 0.55]),
    ("Camerer", [0.512, 0.91, 0.33, 0.00, 0.33, 0.98]),
    ("LK-99", [0.281, 0.71, 0.81, 0.00, 0.00, 0.83]),
    ("RECOVERY", [0.278, 0.56, 0.27, 0.00, 0.25, 0.31]),
    ("Wu survey", [0.173, 0.40, 0.33, 0.00, 0.00, 0.13]),
    ("LaCour", [0.162, 0.52, 1.00, 0.00, 0.00, 0.10]),
];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for (name, row) in CALIBRATION {
        let p = ContributionProfile::from_values([row[1], row[2], row[3], row[4], row[5]]);
        let c = contribution(Some(&p)).map_err(|e| e.to_string())?;
        // integrity 1 and no references: the score is the contribution
        let report = score_manuscript(&[], Vec::new(), Some(&p)).map_err(|e| e.to_string())?;
        ensure(report.score == c.value, format!("{name}: score differs from contribution"))?;
        let dev = (c.value - row[0]).abs();
        worst = worst.max(dev);
        ensure(dev <= 0.003 + 1e-12, format!("{name}: {:.4} vs printed {:.3}", c.value, row[0]))?;
        values.push((name, c));
    }
    let get = |n: &str| values.iter().find(|(k, _)| *k == n).unwrap().1;
    let lk = get("LK-99");
    ensure(lk.bold_penalty_applied && (lk.value - 0.280).abs() <= 0.002 + 1e-12, format!("LK-99 {:.4}", lk.value))?;
    let lc = get("LaCour");
    ensure(lc.bold_penalty_applied && (lc.value - 0.162).abs() < 1e-9, format!("LaCour {:.6}", lc.value))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("9 rows, max deviation {worst:.4}; LK-99 {:.4}, LaCour {:.4}", lk.value, lc.value))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let corpus: Vec<TexDocument> = load_json(&fixtures().join("eval/corpus.json")).map_err(|e| e.to_string())?;
    ensure(corpus.len() == 20, format!("{} documents", corpus.len()))?;
    let (injected, report) = run_injection(&corpus, 10, 2026);
    let count = |k: InjectionKind| injected.truth.iter().filter(|r| r.kind == k).count();
    ensure(
        count(InjectionKind::FakeCite) == 100 && count(InjectionKind::BrokenRef) == 100,
        "expected 100 fake cites and 100 broken refs",
    )?;
    ensure(report.recall == 1.0, format!("recall {}", report.recall))?;
    ensure(report.false_positives == 0, format!("{} false positives", report.false_positives))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{}/{} detected, 0 false positives", report.detected, report.injected))
}

/// The reliability table written out as literal row sums over exact rationals.
fn oracle(b: &ReliabilityBreakdown, rate: Option<Ratio<i64>>) -> Option<Ratio<i64>> {
    let r = |n: i64, d: i64| Ratio::new(n, d);
    let zero = r(0, 1);
    let one = r(1, 1);
    let clamp = |x: Ratio<i64>| x.max(zero).min(one);
    let base = match b.tier {
        VerificationTier::T1 => r(9, 10),
        VerificationTier::T2 => r(7, 10),
        VerificationTier::T3 => r(3, 10),
        VerificationTier::Unverifiable => return None,
    };
    let mut rows = vec![base];
    for _ in 0..b.metadata_mismatches {
        rows.push(r(-1, 10));
    }
    for _ in 0..b.cross_id_mismatches {
        rows.push(r(-1, 10));
    }
    if b.non_formal {
        rows.push(r(-2, 10));
    }
    let mut metadata = rows.into_iter().fold(zero, |a, x| a + x);
    match b.retraction.kind {
        RetractionKind::Retracted => return Some(zero),
        RetractionKind::ExpressionOfConcern => metadata *= r(3, 10),
        RetractionKind::None => {}
    }
    let metadata = clamp(metadata);
    let consistency = if b.oversize {
        Some(one)
    } else {
        b.consistency.map(|c| {
            let mut rows = vec![one];
            rows.extend((0..c.warnings).map(|_| r(-5, 100)));
            rows.extend((0..c.errors).map(|_| r(-10, 100)));
            clamp(rows.into_iter().fold(zero, |a, x| a + x))
        })
    };
    let blended = match consistency {
        Some(c) => r(6, 10) * c + r(4, 10) * metadata,
        None => metadata,
    };
    let cap = r(3, 10);
    let hall = rate.unwrap_or(zero).min(cap);
    let mm = (0..b.bib_metadata_mismatches).fold(zero, |a, _| a + r(5, 100)).min(cap);
    let rt = (0..b.bib_retractions).fold(zero, |a, _| a + r(15, 100)).min(cap);
    Some(clamp(blended - hall - mm - rt))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let tiers = [VerificationTier::T1, VerificationTier::T2, VerificationTier::T3];
    let retractions = [
        RetractionStatus::none(),
        RetractionStatus::expression_of_concern(None, None),
        RetractionStatus::retracted(None, None),
    ];
    // (oversize, counts)
    let consistency: [(bool, Option<(u32, u32)>); 7] = [
        (false, None),
        (false, Some((0, 0))),
        (false, Some((1, 0))),
        (false, Some((0, 1))),
        (false, Some((3, 2))),
        (false, Some((10, 5))),
        (true, Some((4, 4))),
    ];
    let rates: [Option<(i64, i64)>; 5] = [None, Some((0, 1)), Some((1, 10)), Some((7, 20)), Some((9, 10))];
    let mut cases = 0usize;
    let mut max_dev = Ratio::new(0i64, 1);
    for tier in tiers {
        for mm in 0..5u32 {
            for xid in 0..3u32 {
                for non_formal in [false, true] {
                    for ret in &retractions {
                        for (oversize, counts) in consistency {
                            for rate in rates {
                                for bib_mm in [0u32, 3, 8] {
                                    for bib_ret in [0u32, 1, 3] {
                                        let b = ReliabilityBreakdown {
                                            retraction: ret.clone(),
                                            metadata_mismatches: mm,
                                            cross_id_mismatches: xid,
                                            non_formal,
                                            consistency: counts.map(|(w, e)| ConsistencyCounts { warnings: w, errors: e }),
                                            oversize,
                                            bib_hallucination_rate: rate.map(|(n, d)| n as f64 / d as f64),
                                            bib_metadata_mismatches: bib_mm,
                                            bib_retractions: bib_ret,
                                            ..ReliabilityBreakdown::new(tier)
                                        };
                                        let want = oracle(&b, rate.map(|(n, d)| Ratio::new(n, d))).expect("scored tier");
                                        let got = Ratio::new(reliability_micros(&b).expect("scored tier"), 1_000_000);
                                        let dev = if got > want { got - want } else { want - got };
                                        if dev > max_dev {
                                            max_dev = dev;
                                        }
                                        let as_f64 = *want.numer() as f64 / *want.denom() as f64;
                                        ensure(
                                            reliability(&b) == Some(as_f64),
                                            format!("float result differs for {b:?}"),
                                        )?;
                                        cases += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    ensure(cases >= 5000, format!("only {cases} cases"))?;
    ensure(max_dev == Ratio::new(0, 1), format!("max deviation {max_dev}"))?;
    ensure(
        reliability(&ReliabilityBreakdown::new(VerificationTier::Unverifiable)).is_none(),
        "unverifiable references must not be scored",
    )?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{cases} combinations, max deviation 0"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let fixtures: Vec<MatchingFixture> =
        load_json(&fixtures().join("eval/matching.json")).map_err(|e| e.to_string())?;
    ensure(fixtures.len() == 20, format!("{} fixtures", fixtures.len()))?;
    ensure(fixtures.iter().all(|f| f.decoys.len() == 9), "every fixture needs 9 decoys")?;
    let report = run_matching_benchmark(&fixtures, &Scenario::ALL, DEFAULT_MATCH_THRESHOLD, 1);
    let rate = |s: Scenario| report.scenarios.iter().find(|x| x.scenario == s).map_or(0.0, |x| x.success_rate);
    ensure(report.scenarios.len() == 17, "17 scenarios")?;
    ensure(rate(Scenario::YearOffBy1) == 1.0, format!("year +-1 at {}", rate(Scenario::YearOffBy1)))?;
    ensure(
        report.mean_scenarios_correct >= 15.0,
        format!("{:.2}/17 scenarios correct on average", report.mean_scenarios_correct),
    )?;
    within(start.elapsed(), Duration::from_secs(30))?;
    let failing: Vec<String> = report
        .scenarios
        .iter()
        .filter(|s| s.success_rate < 1.0)
        .map(|s| format!("{} {:.0}%", s.scenario.name(), 100.0 * s.success_rate))
        .collect();
    Ok(format!(
        "{:.2}/17 correct per fixture; below 100%: {}",
        report.mean_scenarios_correct,
        failing.join(", ")
    ))
}

fn arb_assessments() -> impl Strategy<Value = Vec<ReferenceAssessment>> {
    let purpose = prop::option::of(prop::sample::select(CitationPurpose::ALL.to_vec()));
    prop::collection::vec(
        (purpose, prop::option::of(0.0..=1.0f64), 0.0..=1.0f64),
        1..25,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (purpose, claim_score, reliability))| ReferenceAssessment {
                key: format!("r{i}"),
                purpose,
                claim_score,
                reliability,
            })
            .collect()
    })
}

fn arb_findings() -> impl Strategy<Value = Vec<Finding>> {
    let level = prop_oneof![
        Just(Level::Error),
        Just(Level::Warning),
        Just(Level::Info),
        Just(Level::ToolLimitation)
    ];
    prop::collection::vec(level, 0..30)
        .prop_map(|ls| ls.into_iter().map(|l| Finding::new(check::DANGLING_REF, l, "x")).collect())
}

fn arb_profile() -> impl Strategy<Value = ContributionProfile> {
    prop::array::uniform5(0.0..=1.0f64).prop_map(ContributionProfile::from_values)
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn criterion_5() -> Outcome {
    run_property(
        "multiplicative zero",
        (arb_findings(), arb_assessments(), arb_profile(), 0..3usize),
        |(mut findings, mut refs, mut profile, which)| {
            match which {
                0 => findings = vec![Finding::new(check::DANGLING_CITE, Level::Error, "x"); findings.len() + 1],
                1 => refs.iter_mut().for_each(|r| r.reliability = 0.0),
                _ => profile = ContributionProfile::from_values([0.0; 5]),
            }
            let s = score_manuscript(&findings, refs, Some(&profile)).unwrap();
            prop_assert_eq!(s.score, 0.0);
            Ok(())
        },
    )?;
    run_property(
        "scale linearity",
        (arb_assessments(), 0.0..=1.0f64),
        |(refs, k)| {
            let base = referencing_quality(&refs).value;
            let scaled: Vec<ReferenceAssessment> = refs
                .iter()
                .map(|r| ReferenceAssessment {
                    reliability: r.reliability * k,
                    ..r.clone()
                })
                .collect();
            let got = referencing_quality(&scaled).value;
            prop_assert!((got - k * base).abs() <= 1e-12, "{} vs {}", got, k * base);
            Ok(())
        },
    )?;
    run_property(
        "order independence",
        (arb_findings(), arb_assessments(), arb_profile(), any::<u64>()),
        |(findings, refs, profile, seed)| {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut f2 = findings.clone();
            let mut r2 = refs.clone();
            f2.shuffle(&mut rng);
            r2.shuffle(&mut rng);
            let a = score_manuscript(&findings, refs, Some(&profile)).unwrap();
            let b = score_manuscript(&f2, r2, Some(&profile)).unwrap();
            prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
            prop_assert_eq!(a.referencing_quality.value.to_bits(), b.referencing_quality.value.to_bits());
            prop_assert_eq!(a.integrity.to_bits(), b.integrity.to_bits());
            Ok(())
        },
    )?;
    run_property(
        "clamping",
        (arb_findings(), arb_assessments(), prop::option::of(arb_profile())),
        |(findings, refs, profile)| {
            let s = score_manuscript(&findings, refs, profile.as_ref()).unwrap();
            for v in [s.integrity, s.referencing_quality.value, s.contribution.value, s.score] {
                prop_assert!((0.0..=1.0).contains(&v), "{} out of range", v);
            }
            if s.contribution.bold_penalty_applied {
                let base = s.contribution.value;
                prop_assert!(base <= 0.75);
            }
            Ok(())
        },
    )?;
    // out-of-range inputs are rejected rather than clamped silently
    let bad = ReferenceAssessment {
        key: "x".into(),
        purpose: None,
        claim_score: Some(1.5),
        reliability: 0.5,
    };
    ensure(score_manuscript(&[], vec![bad], None).is_err(), "claim score 1.5 accepted")?;
    Ok("4 properties x 1000 cases".into())
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let main = copy_paper(&dir.path().join("paper"));
    let replay = dir.path().join("replay");
    fs::create_dir_all(&replay).map_err(|e| e.to_string())?;
    record_run(&main, &replay);
    let run = || {
        let services = replay_services(&replay);
        let out = run_check(&input(&main), &Config::default(), &services).map_err(|e| e.to_string())?;
        let degraded = out.findings.iter().any(|f| f.level == Level::ToolLimitation);
        ensure(!degraded, "offline run degraded: replay incomplete")?;
        Ok::<_, String>(render_structured(&out.findings, &out.references, &out.report))
    };
    let a = run()?;
    let b = run()?;
    ensure(a == b, "structured outputs differ")?;
    Ok(format!("{} identical bytes", a.len()))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rec = Arc::new(RecordingTransport::new(SimulatedRegistry::new(Vec::new())));
    let gw = gateway(Box::new(ReplayTransport::record(dir.path(), Box::new(rec.clone()))));

    let dois: Vec<Doi> = (0..450).map(|i| Doi::parse(&format!("10.1000/batch.{i}")).unwrap()).collect();
    let found = gw.resolve_dois(&dois);
    let doi_calls = rec.requests().len();
    let doi_files = fs::read_dir(dir.path()).map_err(|e| e.to_string())?.count();
    ensure(found.len() == 450, format!("{} DOI results", found.len()))?;
    ensure(doi_calls == 3, format!("450 DOIs took {doi_calls} calls"))?;
    ensure(doi_files == 3, format!("replay log holds {doi_files} DOI fixtures"))?;

    rec.clear();
    let ids: Vec<ExternalId> = (0..501)
        .map(|i| ExternalId::Arxiv(ArxivId::parse(&format!("2101.{i:05}")).unwrap()))
        .collect();
    let found = gw.resolve_external(&ids);
    let ext_calls = rec.requests().len();
    let total_files = fs::read_dir(dir.path()).map_err(|e| e.to_string())?.count();
    ensure(found.len() == 501, format!("{} external results", found.len()))?;
    ensure(ext_calls == 2, format!("501 external IDs took {ext_calls} calls"))?;
    ensure(total_files == 5, format!("replay log holds {total_files} fixtures, expected 5"))?;
    Ok(format!("450 DOIs -> {doi_calls} calls, 501 external IDs -> {ext_calls} calls"))
}

/// Word 4-grams of the manuscript prose, LaTeX commands removed.
fn body_shingles(paths: &[&Path]) -> BTreeSet<String> {
    let command = Regex::new(r"\\[A-Za-z]+\*?(\[[^\]]*\])?(\{[^}]*\})?").unwrap();
    let mut out = BTreeSet::new();
    for p in paths {
        let text = fs::read_to_string(p).unwrap();
        let body = text.split("\\begin{document}").last().unwrap_or(&text);
        let plain = command.replace_all(body, " ");
        let words: Vec<String> = plain
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        for w in words.windows(4) {
            out.insert(w.join(" "));
        }
    }
    out
}

fn normalize_request_text(s: &str) -> String {
    let decoded: String = url::form_urlencoded::parse(s.replace('?', "&").as_bytes())
        .map(|(k, v)| format!("{k} {v} "))
        .collect();
    format!("{s} {decoded}")
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let main = copy_paper(&dir.path().join("paper"));
    let replay = dir.path().join("replay");
    fs::create_dir_all(&replay).map_err(|e| e.to_string())?;
    // cite the extra entry too, so every identifier kind is exercised
    let text = fs::read_to_string(&main).map_err(|e| e.to_string())?;
    fs::write(&main, text.replace("\\cite{lewis2020}", "\\cite{lewis2020,wakefield1998}")).map_err(|e| e.to_string())?;
    let (_, rec) = record_run(&main, &replay);
    let requests = rec.requests();
    ensure(!requests.is_empty(), "no requests recorded")?;

    let intro = main.parent().unwrap().join("sections/intro.tex");
    let shingles = body_shingles(&[&main, &intro]);
    let mut haystacks: Vec<String> = requests
        .iter()
        .map(|r| normalize_request_text(&format!("{} {}", r.url, r.body.as_deref().unwrap_or(""))))
        .collect();
    for entry in fs::read_dir(&replay).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        haystacks.push(normalize_request_text(&v["request"].to_string()));
    }
    for h in &haystacks {
        let padded = format!(" {h} ");
        if let Some(s) = shingles.iter().find(|s| padded.contains(&format!(" {s} "))) {
            return Err(format!("manuscript text `{s}` sent in a request"));
        }
    }
    Ok(format!(
        "{} requests and {} replay files free of {} body phrases",
        requests.len(),
        haystacks.len() - requests.len(),
        shingles.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("calibration rows reproduced by the contribution formula", criterion_1),
        ("injection recall on 200 synthetic errors", criterion_2),
        ("reliability equals the exact row-sum oracle", criterion_3),
        ("matching benchmark over 17 degradation scenarios", criterion_4),
        ("score property suite", criterion_5),
        ("offline runs are byte-identical", criterion_6),
        ("registry batching limits", criterion_7),
        ("no manuscript text leaves the machine", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
