#include "varireal/annotation_service.hpp"
#include "varireal/error.hpp"
#include "varireal/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iostream>

using namespace varireal;

namespace {

struct Options {
  std::string config;
  std::string manifest;
  int parallelism = 0;
  std::optional<std::uint64_t> seed;
  std::string dataset;
  std::string category;
  std::string feasibility = "F";
  std::string regime = "mixed";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string toy_root = ".";
  int toy_train = 3;
  int toy_test = 4;
  bool verbose = false;
};

AnnotationServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

PipelineConfig build_config(const Options& o) {
  PipelineConfig cfg;
  if (o.config.empty()) {
    cfg = toy_pipeline_config(std::filesystem::absolute("."));
  } else {
    cfg = load_pipeline_config(o.config);
  }
  if (!o.manifest.empty()) cfg.manifest = std::filesystem::absolute(o.manifest);
  if (o.parallelism > 0) cfg.parallelism = o.parallelism;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.dataset.empty()) cfg.dataset_id = o.dataset;
  if (!o.category.empty()) cfg.categories = {parse_category(o.category)};
  return cfg;
}

int exit_code(const StageReport& r) { return r.ok() ? 0 : 2; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varireal: synthetic variation pipeline for fine-grained classification"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "pipeline config (JSON); the toy preset when omitted");
  app.add_option("--manifest", o.manifest, "manifest path, overriding the config");
  app.add_option("--stage-parallelism", o.parallelism, "worker threads per stage")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "global seed");
  app.add_option("--dataset", o.dataset, "dataset id (selects the edit preset)");
  app.add_option("--category", o.category, "background, color or texture")
      ->check(CLI::IsMember({"background", "color", "texture"}));
  app.add_flag("-v,--verbose", o.verbose);

  auto* toy = app.add_subcommand("toy-dataset", "write a synthetic two-class dataset");
  toy->add_option("root", o.toy_root, "workspace directory");
  toy->add_option("--train", o.toy_train);
  toy->add_option("--test", o.toy_test);
  toy->add_option("--write-config", o.config, "also save a toy config to this path");

  app.add_subcommand("init", "register real images from <workspace>/real");
  app.add_subcommand("prompts", "generate, self-filter and review attribute prompts");
  app.add_subcommand("maps", "foreground masks and edge maps");
  app.add_subcommand("priors", "raw diffusion priors for every planned job");
  app.add_subcommand("generate", "edit every (real, prompt) job");
  app.add_subcommand("filter", "VQA verdicts, regenerating rejected images");
  auto* train = app.add_subcommand("train", "train adapters on one data regime");
  train->add_option("--regime", o.regime)->check(CLI::IsMember({"real", "syn", "mixed"}));
  train->add_option("--feasibility", o.feasibility)->check(CLI::IsMember({"F", "IF", "Mix"}));
  app.add_subcommand("eval", "accuracy, gap metrics, overlap and similarity reports");
  app.add_subcommand("scale", "accuracy against the synthetic:real ratio");
  auto* serve = app.add_subcommand("annotate-serve", "serve the annotation endpoints");
  serve->add_option("--host", o.host);
  serve->add_option("--port", o.port);
  app.add_subcommand("annotate-export", "write ratings.tsv and the aggregate table");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "toy-dataset") {
      ToyDatasetSpec spec;
      spec.train_per_class = o.toy_train;
      spec.test_per_class = o.toy_test;
      if (o.seed) spec.seed = *o.seed;
      write_toy_dataset(o.toy_root, spec);
      if (!o.config.empty())
        save_pipeline_config(toy_pipeline_config(std::filesystem::absolute(o.toy_root)), o.config);
      return 0;
    }

    Pipeline pipe(build_config(o));
    if (cmd == "init") return exit_code(pipe.init());
    if (cmd == "prompts") return exit_code(pipe.prompts());
    if (cmd == "maps") return exit_code(pipe.maps());
    if (cmd == "priors") return exit_code(pipe.priors());
    if (cmd == "generate") return exit_code(pipe.generate());
    if (cmd == "filter") return exit_code(pipe.filter());
    if (cmd == "train") {
      TrainRequest req{parse_data_regime(o.regime), parse_feasibility_regime(o.feasibility), std::nullopt};
      if (!o.category.empty()) req.category = parse_category(o.category);
      return exit_code(pipe.train(req));
    }
    if (cmd == "eval") {
      const auto r = pipe.eval();
      std::cout << (pipe.config().workspace / "eval" / "report.txt").string() << "\n";
      return exit_code(r);
    }
    if (cmd == "scale") {
      std::optional<AttributeCategory> cat;
      if (!o.category.empty()) cat = parse_category(o.category);
      return exit_code(pipe.scale(cat));
    }
    if (cmd == "annotate-serve") {
      const AnnotationSession session = pipe.annotation_session();
      RatingStore store(pipe.ratings_path());
      AnnotationServer server(session, store, pipe.config().workspace);
      const int port = server.bind(o.host, o.port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("annotating {} items on http://{}:{}", session.items().size(), o.host, port);
      server.serve();
      g_server = nullptr;
      return 0;
    }
    if (cmd == "annotate-export") return exit_code(pipe.annotate_export());
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
