#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "recomed/error.hpp"
#include "recomed/model.hpp"
#include "recomed/recommend.hpp"
#include "recomed/service.hpp"
#include "recomed/synth.hpp"
#include "recomed/text.hpp"

namespace recomed {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  return f;
}

void write_text(const std::string& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
  if (!f) throw Error("cannot write " + path);
}

ParseResult read_prescriptions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return parse_prescriptions(in);
}

json ingest_report_json(const IngestReport& r) {
  json rejected = json::array();
  for (const auto& x : r.rejection_reasons) rejected.push_back({{"line", x.line_number}, {"reason", x.reason}});
  return {{"lines_read", r.lines_read},
          {"records_ok", r.records_ok},
          {"records_rejected", r.records_rejected},
          {"rejections", std::move(rejected)}};
}

// Splits each value on ';' so "--meds 'a;b'" and repeated --meds agree.
std::vector<std::string> split_meds(const std::vector<std::string>& raw) {
  std::vector<std::string> names;
  for (const auto& r : raw) {
    std::size_t pos = 0;
    while (pos <= r.size()) {
      std::size_t end = r.find(';', pos);
      if (end == std::string::npos) end = r.size();
      auto part = trim(std::string_view(r).substr(pos, end - pos));
      if (!part.empty()) names.emplace_back(part);
      pos = end + 1;
    }
  }
  return names;
}

std::string default_model_path() {
  const char* env = std::getenv("RECOMED_MODEL");
  return env ? env : "";
}

void add_config_flags(CLI::App* cmd, EngineConfig& cfg) {
  cmd->add_option("--min-support", cfg.min_support, "Apriori minimum support")->capture_default_str();
  cmd->add_option("--min-confidence", cfg.min_confidence, "Strong-rule confidence threshold")->capture_default_str();
  cmd->add_option("--max-len", cfg.max_len, "Longest itemset mined")->capture_default_str();
  cmd->add_option("--jenks-k", cfg.jenks_k, "Natural-breaks class count")->capture_default_str();
  cmd->add_option("--stop-classes", cfg.stop_class_count, "Top frequency classes treated as stop medicines")
      ->capture_default_str();
  cmd->add_option("--min-jaccard", cfg.min_jaccard, "Minimum Jaccard weight kept after pruning")
      ->capture_default_str();
  cmd->add_option("--eps", cfg.eps, "DBSCAN radius on 1 - Jaccard")->capture_default_str();
  cmd->add_option("--min-pts", cfg.min_pts, "DBSCAN core size, counting the point itself")->capture_default_str();
  cmd->add_option("--resolution", cfg.resolution, "Louvain resolution")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Louvain node-order seed")->capture_default_str();
  cmd->add_option("--w-rule", cfg.weights.rule, "Score weight of rule confidence")->capture_default_str();
  cmd->add_option("--w-jaccard", cfg.weights.jaccard, "Score weight of Jaccard")->capture_default_str();
  cmd->add_option("--w-cluster", cfg.weights.cluster, "Score weight of a shared community")->capture_default_str();
  cmd->add_option("--stop-in", cfg.stop_forced_in, "Force a medicine onto the stop list (repeatable)");
  cmd->add_option("--stop-out", cfg.stop_forced_out, "Keep a medicine off the stop list (repeatable)");
}

void print_stop_proposal(const TransactionDB& db, const StopProposal& p, std::ostream& err) {
  err << "proposed stop medicines (" << p.stoplist.med_ids.size() << "):\n";
  for (MedId id : p.stoplist.med_ids) {
    const auto& m = db.medicine(id);
    err << "  " << m.name << "  freq=" << m.frequency << "\n";
  }
}

// Returns false if the reviewer rejected the list.
bool confirm_stoplist(const TransactionDB& db, EngineConfig& cfg, std::istream& in, std::ostream& err) {
  for (;;) {
    print_stop_proposal(db, propose_stop_list(db, cfg), err);
    err << "accept? [y]es / [n]o / +NAME forces in / -NAME keeps out: " << std::flush;
    std::string line;
    if (!std::getline(in, line)) return true;
    auto answer = trim(line);
    if (answer.empty() || answer == "y" || answer == "Y" || answer == "yes") return true;
    if (answer == "n" || answer == "N" || answer == "no") return false;
    std::string name(trim(answer.substr(1)));
    if ((answer[0] == '+' || answer[0] == '-') && !name.empty()) {
      if (db.find_by_name(name).empty()) {
        err << "unknown medicine: " << name << "\n";
        continue;
      }
      auto& target = answer[0] == '+' ? cfg.stop_forced_in : cfg.stop_forced_out;
      auto& other = answer[0] == '+' ? cfg.stop_forced_out : cfg.stop_forced_in;
      std::erase(other, name);
      target.push_back(name);
      continue;
    }
    err << "unrecognized answer\n";
  }
}

void print_recommendations(const json& response, std::ostream& out) {
  std::size_t rank = 0;
  for (const auto& r : response["recommendations"]) {
    char score[32];
    std::snprintf(score, sizeof score, "%.4f", r["score"].get<double>());
    out << ++rank << "\t" << r["name"].get<std::string>() << "\t" << score << "\t" << r["atc"]["badge"].get<std::string>();
    if (r["flag"].get<std::string>() != "none") out << "\t" << r["flag"].get<std::string>();
    out << "\n";
  }
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Co-prescription recommender: mining, clustering and serving"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_in, ingest_out, ingest_report;
  auto* ingest = app.add_subcommand("ingest", "Parse prescription JSONL into a transaction database");
  ingest->add_option("--input", ingest_in, "Prescription JSONL")->required();
  ingest->add_option("--out", ingest_out, "Transaction database JSON")->required();
  ingest->add_option("--report", ingest_report, "Write the rejection report as JSON");

  // sample
  std::string sample_db, sample_out;
  std::size_t sample_n = 0;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Uniformly sample transactions without replacement");
  sample->add_option("--db", sample_db, "Transaction database JSON")->required();
  sample->add_option("--n", sample_n, "Sample size")->required();
  sample->add_option("--seed", sample_seed, "Sampling seed")->capture_default_str();
  sample->add_option("--out", sample_out, "Sampled database JSON")->required();

  // build
  EngineConfig cfg;
  std::string build_input, build_db, build_atc, build_out, build_rules_csv, build_graph_report, build_edges,
      build_partition_csv, build_built_at;
  bool build_confirm = false;
  auto* build = app.add_subcommand("build", "Run the full pipeline and write a model artifact");
  auto* in_opt = build->add_option("--input", build_input, "Prescription JSONL");
  auto* db_opt = build->add_option("--db", build_db, "Transaction database JSON");
  in_opt->excludes(db_opt);
  build->add_option("--atc", build_atc, "ATC table (TSV or CSV)")->required();
  build->add_option("--out", build_out, "Model artifact JSON")->required();
  build->add_option("--rules-csv", build_rules_csv, "Write mined rules as CSV");
  build->add_option("--graph-report", build_graph_report, "Write the Jenks/stop/prune report as JSON");
  build->add_option("--edges", build_edges, "Write the similarity graph as an edge list");
  build->add_option("--partition-csv", build_partition_csv, "Write the partition as CSV");
  build->add_option("--built-at", build_built_at, "Timestamp recorded in the artifact");
  build->add_flag("--confirm-stoplist", build_confirm, "Review the stop list interactively before building");
  add_config_flags(build, cfg);

  // recommend
  std::string rec_model = default_model_path();
  std::vector<std::string> rec_meds;
  std::size_t rec_k = kDefaultTopK;
  bool rec_json = false;
  auto* rec = app.add_subcommand("recommend", "Rank co-prescription candidates for a draft prescription");
  rec->add_option("--model", rec_model, "Model artifact (default $RECOMED_MODEL)");
  rec->add_option("--meds", rec_meds, "Medicine names, repeatable or ';'-separated")->required();
  rec->add_option("-k", rec_k, "Number of recommendations")->capture_default_str()->check(CLI::PositiveNumber);
  rec->add_flag("--json", rec_json, "Print the API response body");

  // serve
  std::string serve_model = default_model_path(), serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--model", serve_model, "Model artifact (default $RECOMED_MODEL)");
  serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_port, "Port, 0 for any free port")->capture_default_str();

  // synth
  SynthConfig syn;
  std::string syn_out, syn_truth, syn_atc, syn_db;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted groups");
  synth->add_option("--groups", syn.n_groups)->capture_default_str();
  synth->add_option("--meds-per-group", syn.meds_per_group)->capture_default_str();
  synth->add_option("--stop", syn.n_stop)->capture_default_str();
  synth->add_option("--noise-meds", syn.n_noise_meds)->capture_default_str();
  synth->add_option("--prescriptions", syn.n_prescriptions)->capture_default_str();
  synth->add_option("--p-stop", syn.p_stop)->capture_default_str();
  synth->add_option("--p-noise", syn.p_noise)->capture_default_str();
  synth->add_option("--min-items", syn.min_items)->capture_default_str();
  synth->add_option("--max-items", syn.max_items)->capture_default_str();
  synth->add_option("--seed", syn.seed)->capture_default_str();
  synth->add_option("--out", syn_out, "Prescription JSONL")->required();
  synth->add_option("--truth", syn_truth, "Ground-truth JSON")->required();
  synth->add_option("--atc-out", syn_atc, "ATC table TSV")->required();
  synth->add_option("--db-out", syn_db, "Also write the transaction database");

  // eval
  std::string eval_model, eval_truth, eval_tags;
  int eval_level = 1;
  auto* eval = app.add_subcommand("eval", "Score a model against planted truth or a tagged sample");
  eval->add_option("--model", eval_model, "Model artifact");
  eval->add_option("--truth", eval_truth, "Ground-truth JSON");
  eval->add_option("--tags", eval_tags, "Tagged sample CSV");
  eval->add_option("--level", eval_level, "ATC level for purity")->capture_default_str()->check(CLI::Range(1, 5));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failing->help();
    return 2;
  }

  try {
    if (app.got_subcommand(ingest)) {
      auto parsed = read_prescriptions(ingest_in);
      for (const auto& r : parsed.report.rejection_reasons) {
        err << ingest_in << ":" << r.line_number << ": rejected (" << r.reason << ")\n";
      }
      auto db = build_transaction_db(parsed.records);
      save_db(db, ingest_out);
      if (!ingest_report.empty()) write_text(ingest_report, ingest_report_json(parsed.report).dump(2) + "\n");
      out << "ingested " << db.size() << " prescriptions, " << db.catalog().size() << " medicines, "
          << parsed.report.records_rejected << " rejected\n";
      return 0;
    }

    if (app.got_subcommand(sample)) {
      auto db = load_db(sample_db);
      auto s = sample_transactions(db, sample_n, sample_seed);
      save_db(s, sample_out);
      out << "sampled " << s.size() << " of " << db.size() << " prescriptions\n";
      return 0;
    }

    if (app.got_subcommand(build)) {
      if (build_input.empty() && build_db.empty()) {
        err << "error: build needs --input or --db\n" << build->help();
        return 2;
      }
      TransactionDB db = [&] {
        if (!build_db.empty()) return load_db(build_db);
        auto parsed = read_prescriptions(build_input);
        if (parsed.report.records_rejected > 0) {
          err << "warning: " << parsed.report.records_rejected << " malformed prescriptions skipped\n";
        }
        return build_transaction_db(parsed.records);
      }();
      auto atc = load_atc_table_file(build_atc);
      for (const auto& r : atc.report.rejected) err << build_atc << ":" << r.line_number << ": " << r.reason << "\n";
      cfg.validate();
      if (build_confirm && !confirm_stoplist(db, cfg, in, err)) {
        err << "stop list rejected; nothing built\n";
        return 1;
      }
      auto artifact = build_model(db, atc.index, cfg, build_built_at);
      save_model(artifact, build_out);
      const auto& m = artifact.model;
      if (!build_rules_csv.empty()) {
        auto f = open_out(build_rules_csv);
        write_rules_csv(f, artifact.rules, m.catalog);
      }
      if (!build_graph_report.empty()) {
        write_text(build_graph_report, graph_report_json(m.jenks, m.stoplist, m.prune_report).dump(2) + "\n");
      }
      if (!build_edges.empty()) {
        auto f = open_out(build_edges);
        write_edge_list(f, m.similarity);
      }
      if (!build_partition_csv.empty()) {
        auto f = open_out(build_partition_csv);
        write_partition_csv(f, m);
      }
      out << "model " << build_out << ": " << artifact.rules.rules.size() << " rules, " << m.stoplist.med_ids.size()
          << " stop medicines, " << m.outliers.med_ids.size() << " outliers, " << m.partition.communities.size()
          << " communities\n";
      return 0;
    }

    if (app.got_subcommand(rec)) {
      if (rec_model.empty()) {
        err << "error: --model not given and RECOMED_MODEL unset\n";
        return 2;
      }
      auto artifact = load_model(rec_model);
      auto names = split_meds(rec_meds);
      if (names.empty()) {
        err << "error: --meds is empty\n";
        return 2;
      }
      json response;
      try {
        response = recommend_by_names(artifact.model, artifact.rules, names, rec_k);
      } catch (const UnknownMedicinesError& e) {
        err << "error: unknown medicines:";
        for (const auto& n : e.names()) err << " \"" << n << "\"";
        err << "\n";
        return 1;
      }
      for (const auto& n : response["unknown"]) err << "warning: unknown medicine \"" << n.get<std::string>() << "\"\n";
      if (rec_json) {
        out << response.dump() << "\n";
      } else {
        print_recommendations(response, out);
      }
      return 0;
    }

    if (app.got_subcommand(serve)) {
      if (serve_model.empty()) {
        err << "error: --model not given and RECOMED_MODEL unset\n";
        return 2;
      }
      Service service(load_model_snapshot(serve_model));
      HttpServer server(service);
      int port = server.bind(serve_host, serve_port);
      out << "serving " << serve_model << " on http://" << serve_host << ":" << port << "/api/v1\n" << std::flush;
      server.listen();
      return 0;
    }

    if (app.got_subcommand(synth)) {
      auto corpus = generate_synthetic(syn);
      for (const auto& w : corpus.warnings) err << "warning: " << w << "\n";
      {
        auto f = open_out(syn_out);
        write_prescriptions_jsonl(f, corpus.records);
      }
      write_text(syn_truth, truth_to_json(corpus.db, corpus.truth).dump(2) + "\n");
      write_text(syn_atc, corpus.atc_table);
      if (!syn_db.empty()) save_db(corpus.db, syn_db);
      out << "generated " << corpus.records.size() << " prescriptions over " << corpus.db.catalog().size()
          << " medicines\n";
      return 0;
    }

    if (app.got_subcommand(eval)) {
      if (eval_tags.empty() && (eval_model.empty() || eval_truth.empty())) {
        err << "error: eval needs --model with --truth, or --tags\n" << eval->help();
        return 2;
      }
      json report = json::object();
      if (!eval_model.empty() && !eval_truth.empty()) {
        auto artifact = load_model(eval_model);
        std::ifstream tf(eval_truth);
        if (!tf) throw Error("cannot read " + eval_truth);
        json truth_doc = json::parse(tf);
        auto truth = truth_from_json(truth_doc, artifact.model.catalog);
        report = evaluation_to_json(evaluate_model(artifact.model, truth, eval_level));
      }
      if (!eval_tags.empty()) {
        auto tags = load_tagged_sample_file(eval_tags);
        std::size_t ones = 0;
        for (const auto& r : tags.rows) ones += r.tag == 1;
        report["tags"] = {{"rows", tags.rows.size()}, {"correct", ones}, {"accuracy", evaluate_tags(tags)}};
      }
      out << report.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace recomed
