// Command-line front end. Talks to the library only through sing.h.

#include <sing.h>

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct ConfigDeleter {
  void operator()(sing_config* c) const { sing_config_destroy(c); }
};
struct RollDeleter {
  void operator()(sing_roll* r) const { sing_roll_destroy(r); }
};
struct SsmDeleter {
  void operator()(sing_ssm* s) const { sing_ssm_destroy(s); }
};
struct ModelDeleter {
  void operator()(sing_model* m) const { sing_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<sing_config, ConfigDeleter>;
using RollPtr = std::unique_ptr<sing_roll, RollDeleter>;
using SsmPtr = std::unique_ptr<sing_ssm, SsmDeleter>;
using ModelPtr = std::unique_ptr<sing_model, ModelDeleter>;

class Failure {
 public:
  Failure(int code, std::string message) : code_(code), message_(std::move(message)) {}
  int code() const { return code_; }
  const std::string& message() const { return message_; }

 private:
  int code_;
  std::string message_;
};

void check(sing_status status) {
  if (status != SING_OK) throw Failure(1, sing_last_error());
}

void require_exists(const std::string& path) {
  if (path.empty()) return;
  if (!fs::exists(path)) throw Failure(1, "no such file or directory: " + path);
}

void require_given(const std::string& value, const char* flag, const char* verb) {
  if (value.empty()) throw Failure(1, std::string(verb) + " requires " + flag);
}

std::string config_default(const char* key) {
  ConfigPtr cfg(sing_config_create());
  char buf[64];
  if (sing_config_get(cfg.get(), key, buf, sizeof buf, nullptr) != SING_OK) return "";
  return buf;
}

// Flag -> config key for every tunable exposed on the command line.
const std::vector<std::pair<std::string, std::string>>& tunables() {
  static const std::vector<std::pair<std::string, std::string>> t = {
      {"--hidden", "hidden_size"},        {"--combiner", "combiner"},
      {"--seed-len", "seed_len"},         {"--top-k", "top_k"},
      {"--max-notes", "max_notes"},       {"--pitch-lo", "pitch_lo"},
      {"--pitch-hi", "pitch_hi"},         {"--p-feedback", "p_feedback"},
      {"--lr", "lr"},                     {"--epochs", "epochs"},
      {"--grid-k", "grid.k"},             {"--grid-count", "grid.count"},
      {"--grid-max-len", "grid.max_len"}, {"--batch-cap", "batch.cap"},
      {"--edit-max-fraction", "edit.max_fraction"}};
  return t;
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string in;
  std::string out;
  std::string checkpoint;
  std::string tmpl;
  std::string plan;
  std::string val_plan;
  bool ablated = false;
  bool random = false;
  std::size_t generations = 3;
  std::map<std::string, std::string> overrides;  // config key -> text
  std::vector<std::pair<std::string, CLI::Option*>> override_opts;  // one per subcommand
  std::vector<CLI::Option*> seed_opts;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Configuration file (key = value lines)");
  c.seed_opts.push_back(
      cmd->add_option("--seed", c.seed, "Seed for every random decision")->capture_default_str());
  cmd->add_option("--jobs", c.jobs, "Worker threads for per-piece work")->capture_default_str();
  cmd->add_option("--in", c.in, "Input path");
  cmd->add_option("--out", c.out, "Output path");
  cmd->add_option("--checkpoint", c.checkpoint, "Model checkpoint (SINGCKPT)");
  cmd->add_option("--template", c.tmpl, "Template SSM (SINGSSM)");
  cmd->add_flag("--ablated", c.ablated, "Train the attention-free baseline");
  for (const auto& [flag, key] : tunables()) {
    auto* opt = cmd->add_option(flag, c.overrides[key], "Config key " + key);
    opt->default_str(config_default(key.c_str()));
    c.override_opts.emplace_back(key, opt);
  }
}

ConfigPtr make_config(const Common& c) {
  ConfigPtr cfg(sing_config_create());
  if (!cfg) throw Failure(1, "out of memory");
  if (!c.config.empty()) {
    require_exists(c.config);
    check(sing_config_load_file(cfg.get(), c.config.c_str()));
  }
  for (const auto& [key, opt] : c.override_opts) {
    if (opt->count() > 0) check(sing_config_set(cfg.get(), key.c_str(), c.overrides.at(key).c_str()));
  }
  return cfg;
}

// --seed when given, otherwise the config's seed key.
std::uint64_t seed_of(const Common& c, const sing_config* cfg) {
  for (auto* opt : c.seed_opts) {
    if (opt->count() > 0) return c.seed;
  }
  char buf[32];
  check(sing_config_get(cfg, "seed", buf, sizeof buf, nullptr));
  return std::stoull(buf);
}

int run_preprocess(const Common& c) {
  require_given(c.in, "--in", "preprocess");
  require_given(c.out, "--out", "preprocess");
  require_exists(c.in);
  std::size_t written = 0, failed = 0;
  check(sing_preprocess(c.in.c_str(), c.out.c_str(), c.jobs, &written, &failed));
  std::printf("preprocessed %zu file(s), %zu excluded\n", written, failed);
  return 0;
}

int run_batch_plan(const Common& c) {
  require_given(c.in, "--in", "batch-plan");
  require_given(c.out, "--out", "batch-plan");
  require_exists(c.in);
  const auto cfg = make_config(c);
  std::size_t assigned = 0, excluded = 0, batches = 0;
  check(sing_batch_plan(cfg.get(), c.in.c_str(), seed_of(c, cfg.get()), c.out.c_str(), &assigned,
                        &excluded, &batches));
  std::printf("%zu segment(s) in %zu batch(es), %zu excluded\n", assigned, batches, excluded);
  return 0;
}

void print_epoch(void*, size_t epoch, double train_loss, double val_loss, double seconds) {
  std::printf("epoch %zu train_loss %.6f val_loss %.6f (%.1fs)\n", epoch, train_loss, val_loss, seconds);
  std::fflush(stdout);
}

int run_train(const Common& c) {
  require_given(c.in, "--in", "train");
  require_given(c.plan, "--plan", "train");
  require_given(c.out, "--out", "train");
  require_exists(c.in);
  require_exists(c.plan);
  require_exists(c.val_plan);
  const auto cfg = make_config(c);
  std::size_t best = 0;
  check(sing_train(cfg.get(), c.in.c_str(), c.plan.c_str(),
                   c.val_plan.empty() ? nullptr : c.val_plan.c_str(), c.out.c_str(),
                   seed_of(c, cfg.get()), c.ablated ? 1 : 0, print_epoch, nullptr, &best));
  std::printf("best epoch %zu -> %s\n", best, (fs::path(c.out) / "best.ckpt").string().c_str());
  return 0;
}

int run_generate(const Common& c) {
  require_given(c.checkpoint, "--checkpoint", "generate");
  require_given(c.in, "--in", "generate");
  require_given(c.tmpl, "--template", "generate");
  require_given(c.out, "--out", "generate");
  require_exists(c.checkpoint);
  require_exists(c.in);
  require_exists(c.tmpl);
  sing_model* m = nullptr;
  check(sing_model_read(c.checkpoint.c_str(), &m));
  ModelPtr model(m);
  sing_roll* r = nullptr;
  check(sing_roll_read(c.in.c_str(), &r));
  RollPtr seed(r);
  sing_ssm* s = nullptr;
  check(sing_ssm_read(c.tmpl.c_str(), &s));
  SsmPtr tmpl(s);
  sing_roll* g = nullptr;
  check(sing_model_generate(model.get(), seed.get(), tmpl.get(), c.seed, &g));
  RollPtr out(g);
  const fs::path prefix = fs::path(c.out).replace_extension();
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  check(sing_roll_write(out.get(), (prefix.string() + ".proll").c_str()));
  check(sing_roll_write_midi(out.get(), (prefix.string() + ".mid").c_str()));
  std::printf("generated %zu samples -> %s.proll, %s.mid\n", sing_roll_samples(out.get()),
              prefix.string().c_str(), prefix.string().c_str());
  return 0;
}

int run_evaluate(const Common& c) {
  require_given(c.in, "--in", "evaluate");
  require_given(c.out, "--out", "evaluate");
  require_exists(c.in);
  if (c.checkpoint.empty() && !c.random) throw Failure(1, "evaluate requires --checkpoint or --random");
  const auto cfg = make_config(c);
  ModelPtr model;
  if (!c.random) {
    require_exists(c.checkpoint);
    sing_model* m = nullptr;
    check(sing_model_read(c.checkpoint.c_str(), &m));
    model.reset(m);
  }
  double mean = 0.0;
  std::size_t pieces = 0, skipped = 0;
  check(sing_evaluate(model.get(), cfg.get(), c.in.c_str(), seed_of(c, cfg.get()), c.generations,
                      c.jobs, c.out.c_str(), &mean, &pieces, &skipped));
  std::printf("mean standardized MSE %.6f over %zu piece(s), %zu skipped\n", mean, pieces, skipped);
  return 0;
}

int run_render(const Common& c) {
  require_given(c.in, "--in", "render-ssm");
  require_given(c.out, "--out", "render-ssm");
  require_exists(c.in);
  sing_ssm* s = nullptr;
  check(sing_ssm_read(c.in.c_str(), &s));
  SsmPtr ssm(s);
  check(sing_ssm_write_pgm(ssm.get(), c.out.c_str()));
  return 0;
}

int run_synth(const Common& c) {
  require_given(c.in, "--in", "synth-ssm");
  require_given(c.out, "--out", "synth-ssm");
  require_exists(c.in);
  sing_ssm* s = nullptr;
  check(sing_ssm_synth_file(c.in.c_str(), &s));
  SsmPtr ssm(s);
  check(sing_ssm_write(ssm.get(), c.out.c_str()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SING: structure-guided music generation from self-similarity matrices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sing_version()));

  Common c;
  struct Verb {
    const char* name;
    const char* help;
    int (*run)(const Common&);
  };
  const Verb verbs[] = {
      {"preprocess", "MIDI directory -> PRoll and SINGSSM files", run_preprocess},
      {"batch-plan", "PRoll directory -> batch plan", run_batch_plan},
      {"train", "Plan + corpus -> per-epoch checkpoints and report.csv", run_train},
      {"generate", "Checkpoint + seed PRoll + template SSM -> PRoll and MIDI", run_generate},
      {"evaluate", "Checkpoint (or --random) + corpus -> standardized-MSE CSV", run_evaluate},
      {"render-ssm", "SINGSSM -> PGM image", run_render},
      {"synth-ssm", "Synthetic SSM spec -> SINGSSM", run_synth},
  };
  std::map<std::string, int (*)(const Common&)> dispatch;
  for (const auto& v : verbs) {
    auto* cmd = app.add_subcommand(v.name, v.help);
    add_common(cmd, c);
    dispatch[v.name] = v.run;
    const std::string name = v.name;
    if (name == "train") {
      cmd->add_option("--plan", c.plan, "Batch plan for the training pieces");
      cmd->add_option("--val-plan", c.val_plan, "Batch plan for validation pieces");
    }
    if (name == "evaluate") {
      cmd->add_flag("--random", c.random, "Evaluate the uniform random baseline");
      cmd->add_option("--generations", c.generations, "Generations per piece")->capture_default_str();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sing: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) return dispatch.at(sub->get_name())(c);
  } catch (const Failure& f) {
    std::cerr << "sing: " << f.message() << '\n';
    return f.code();
  } catch (const std::exception& e) {
    std::cerr << "sing: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
