//! Operator CLI: project lifecycle, sentence import, webhook hosting,
//! simulation, statistics, corpus export, BLEU evaluation and replay
//! verification.

mod serve;
mod store;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crowdnorm_core::corpus::{export_corpus, import_sentences, load_references};
use crowdnorm_core::dispatch::leaderboard;
use crowdnorm_core::eval::{corpus_bleu, extract_nth_corpus, weekly_bleu_series};
use crowdnorm_core::inference::{run_em, VoteMatrix};
use crowdnorm_core::sim::{run_simulation, series_files, SimConfig};
use crowdnorm_core::stats::project_stats;
use crowdnorm_core::{CandidateId, Project, ProjectConfig, Timestamp};

#[derive(Parser)]
#[command(
    name = "crowdnorm",
    about = "Gamified crowdsourcing engine for informal-to-formal text corpora",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a project directory with a config and an empty event log.
    Init {
        #[arg(long)]
        dir: PathBuf,
        /// Optional config TOML; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Import informal sentences (one per line; optional leading id column).
    Import {
        #[arg(long)]
        dir: PathBuf,
        file: PathBuf,
    },
    /// Host the messenger webhook and the reminder scheduler.
    Serve {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Secret path segment; defaults to $WEBHOOK_SECRET, then to the
        /// bot credential in $BOT_TOKEN, then to "dev".
        #[arg(long)]
        secret: Option<String>,
        /// Queue file for outbound calls beyond the reply-as-method one.
        #[arg(long)]
        outbox: Option<PathBuf>,
        /// Exit after N requests (testing aid).
        #[arg(long)]
        max_requests: Option<u64>,
    },
    /// Run a seeded crowd simulation from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print dataset statistics.
    Stats {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Export the rank-n parallel corpus as TSV.
    Export {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the rank-n extract against a reference file with corpus BLEU.
    Eval {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        /// Also print the week-by-week BLEU series.
        #[arg(long)]
        weekly: bool,
        /// Horizon for the weekly series (defaults to the log's span).
        #[arg(long)]
        weeks: Option<usize>,
    },
    /// Print the top of the leaderboard.
    Leaderboard {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Verify the event log: gapless, replayable, totals consistent.
    ReplayCheck {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn beliefs_for(project: &Project) -> Result<BTreeMap<CandidateId, f64>> {
    let matrix = VoteMatrix::from_project(project);
    if matrix.is_empty() {
        return Ok(BTreeMap::new());
    }
    Ok(run_em(&matrix, &project.config().em)?.beliefs)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Init { dir, config } => {
            let config = match config {
                Some(path) => store::read_config_file(&path)?,
                None => ProjectConfig::default(),
            };
            store::init_project(&dir, config)?;
            println!("initialized project at {}", dir.display());
        }
        Command::Import { dir, file } => {
            let mut project = store::load_project(&dir)?;
            let known = project.log().len();
            let summary = import_sentences(&mut project, &file, Timestamp::now())?;
            store::append_events(&dir, &project, known)?;
            println!(
                "imported {} tasks ({} duplicates skipped, {} blank lines)",
                summary.created, summary.skipped_duplicates, summary.skipped_blank
            );
        }
        Command::Serve {
            dir,
            addr,
            secret,
            outbox,
            max_requests,
        } => {
            let project = store::load_project(&dir)?;
            let secret = secret
                .or_else(|| std::env::var("WEBHOOK_SECRET").ok())
                .or_else(|| std::env::var("BOT_TOKEN").ok())
                .unwrap_or_else(|| "dev".to_owned());
            let outbox = outbox.unwrap_or_else(|| dir.join("outbox.jsonl"));
            serve::serve(
                &dir,
                project,
                serve::ServeOptions {
                    addr,
                    secret,
                    outbox,
                    max_requests,
                },
            )?;
        }
        Command::Simulate { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("cannot read {}", config.display()))?;
            let sim_config: SimConfig = toml::from_str(&text)
                .with_context(|| format!("invalid sim config {}", config.display()))?;
            let output = run_simulation(&sim_config)?;

            fs::create_dir_all(&out)?;
            fs::write(
                out.join("report.json"),
                serde_json::to_string_pretty(&output.report)? + "\n",
            )?;
            let mut log = fs::File::create(out.join("events.log"))?;
            use std::io::Write as _;
            for record in output.project.log() {
                writeln!(log, "{}", crowdnorm_core::event::encode_line(record))?;
            }
            fs::write(
                store::config_path(&out),
                toml::to_string_pretty(output.project.config())?,
            )?;
            let series_dir = out.join("series");
            fs::create_dir_all(&series_dir)?;
            for (name, content) in series_files(&output) {
                fs::write(series_dir.join(name), content)?;
            }
            let beliefs = output.em.as_ref().map(|e| e.beliefs.clone()).unwrap_or_default();
            export_corpus(&output.project, &beliefs, 1, &out.join("export_rank1.tsv"))?;

            println!(
                "simulation done: {} interactions, {} candidates, {} votes, rank-1 BLEU {:.4}",
                output.report.interactions_executed,
                output.report.stats.total_candidates,
                output.report.stats.total_votes,
                output.report.bleu_by_rank[0].score
            );
            println!("wrote report, event log, export and series under {}", out.display());
        }
        Command::Stats { dir, json } => {
            let project = store::load_project(&dir)?;
            let stats = project_stats(&project);
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                println!("tasks:                     {}", stats.task_count);
                println!("participants:              {}", stats.participant_count);
                println!("total candidates:          {}", stats.total_candidates);
                println!("total votes:               {}", stats.total_votes);
                println!("  upvotes:                 {}", stats.total_upvotes);
                println!("  downvotes:               {}", stats.total_downvotes);
                println!("skips:                     {}", stats.total_skips);
                println!("eliminated candidates:     {}", stats.eliminated_candidates);
                println!("triggers (low/high):       {}/{}", stats.low_triggers, stats.high_triggers);
                println!("avg candidates per task:   {}", stats.avg_candidates_per_task);
                println!("avg votes per task:        {}", stats.avg_votes_per_task);
                println!("avg upvotes per task:      {}", stats.avg_upvotes_per_task);
                println!("avg downvotes per task:    {}", stats.avg_downvotes_per_task);
                println!("vote shares (up/down):     {}/{}", stats.upvote_share, stats.downvote_share);
                println!("candidates-per-task histogram:");
                for (count, tasks) in &stats.candidate_count_histogram {
                    println!("  {count}: {tasks}");
                }
            }
        }
        Command::Export { dir, rank, out } => {
            let project = store::load_project(&dir)?;
            let beliefs = beliefs_for(&project)?;
            let rows = export_corpus(&project, &beliefs, rank, &out)?;
            println!("wrote {rows} rows to {}", out.display());
        }
        Command::Eval {
            dir,
            refs,
            rank,
            weekly,
            weeks,
        } => {
            let project = store::load_project(&dir)?;
            let references = load_references(&project, &refs)?;
            let beliefs = beliefs_for(&project)?;
            let extract = extract_nth_corpus(&project, &beliefs, rank);
            if extract.pairs.is_empty() {
                bail!("no rank-{rank} candidates to score");
            }
            let report = corpus_bleu(&extract.hypotheses(), &references, 4)?;
            println!(
                "corpus BLEU (rank {rank}, {} segments, {} references/task avg): {:.4}",
                extract.pairs.len(),
                references.avg_references_per_task(),
                report.score
            );
            println!(
                "  precisions: {}",
                report
                    .precisions
                    .iter()
                    .map(|p| format!("{p:.4}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            println!(
                "  brevity penalty: {:.4} (c={}, r={})",
                report.brevity_penalty, report.candidate_length, report.effective_reference_length
            );
            if weekly {
                let week_ms = i64::from(project.config().week_length_days) * 86_400_000;
                let series = weekly_bleu_series(project.log(), &references, week_ms, weeks)?;
                println!("weekly BLEU series:");
                for (week, report) in series {
                    println!("  week {week}: {:.4}", report.score);
                }
            }
        }
        Command::Leaderboard { dir, top } => {
            let project = store::load_project(&dir)?;
            for entry in leaderboard(&project, top) {
                let name = project
                    .participants()
                    .get(&entry.participant_id)
                    .map(|p| p.display_name.clone())
                    .unwrap_or_default();
                println!(
                    "{:>3}. {:<20} {:>8} pts  level {:>4}  (gap {})",
                    entry.rank,
                    name,
                    entry.points,
                    project.level(entry.participant_id),
                    entry.gap_to_next
                );
            }
        }
        Command::ReplayCheck { dir } => {
            let records = store::load_records(&dir)?;
            let project = Project::replay(&records)?;
            // Fold a second time and compare snapshots byte for byte.
            let again = Project::replay(&records)?;
            if project.snapshot_json() != again.snapshot_json() {
                bail!("replay is not deterministic");
            }
            for participant in project.participants().keys() {
                let cached = project.total_points(*participant);
                let recounted = project.ledger().recompute_total(*participant);
                if cached != recounted {
                    bail!("ledger total mismatch for participant {participant}: {cached} != {recounted}");
                }
            }
            println!(
                "ok: {} events, {} tasks, {} participants, {} candidates, {} votes",
                records.len(),
                project.tasks().len(),
                project.participants().len(),
                project.candidates().len(),
                project.votes().len()
            );
        }
    }
    Ok(())
}
