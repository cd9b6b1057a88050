#include <doctest.h>

#include <string>

#include "fixtures.hpp"
#include "sing/formats.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = SING_CLI_PATH;

fixture::Run cli(const std::string& args, const fs::path& dir) {
  return fixture::run("'" + kCli + "' " + args, dir / "cli.log");
}

}  // namespace

TEST_CASE("unknown verbs print usage and exit 2") {
  const fs::path dir = fixture::scratch("sing_test_cli_usage");
  const auto r = cli("compose", dir);
  CHECK(r.status == 2);
  CHECK(r.output.find("Usage") != std::string::npos);
  CHECK(cli("", dir).status == 2);
  fs::remove_all(dir);
}

TEST_CASE("missing input files exit 1 naming the path") {
  const fs::path dir = fixture::scratch("sing_test_cli_missing");
  const auto r = cli("render-ssm --in " + (dir / "nope.ssm").string() + " --out " + (dir / "x.pgm").string(), dir);
  CHECK(r.status == 1);
  CHECK(r.output.find((dir / "nope.ssm").string()) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("help lists every flag with its default") {
  const fs::path dir = fixture::scratch("sing_test_cli_help");
  const auto r = cli("train --help", dir);
  CHECK(r.status == 0);
  for (const char* flag : {"--config", "--seed", "--jobs", "--in", "--out", "--checkpoint", "--template",
                           "--ablated", "--epochs", "--hidden"})
    CHECK(r.output.find(flag) != std::string::npos);
  for (const char* def : {"0.8", "0.001", "128", "50", "10", "700", "100", "0.04", "16"})
    CHECK(r.output.find(def) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("synth-ssm then render-ssm draws the block and a white diagonal") {
  const fs::path dir = fixture::scratch("sing_test_cli_synth");
  {
    std::ofstream spec(dir / "spec.txt");
    spec << "length=8\nbackground=0\nblock=0,4,0.5\n";
  }
  REQUIRE(cli("synth-ssm --in " + (dir / "spec.txt").string() + " --out " + (dir / "s.ssm").string(), dir).status == 0);
  REQUIRE(cli("render-ssm --in " + (dir / "s.ssm").string() + " --out " + (dir / "s.pgm").string(), dir).status == 0);
  const std::string pgm = fixture::slurp(dir / "s.pgm");
  const std::string header = "P5\n8 8\n255\n";
  REQUIRE(pgm.size() == header.size() + 64);
  auto px = [&](int r, int c) { return static_cast<unsigned char>(pgm[header.size() + r * 8 + c]); };
  for (int i = 0; i < 8; ++i) CHECK(px(i, i) == 255);
  CHECK(px(0, 3) == 128);
  CHECK(px(3, 1) == 128);
  CHECK(px(0, 5) == 0);
  CHECK(px(6, 7) == 0);
  fs::remove_all(dir);
}

TEST_CASE("preprocess, train and generate from the command line") {
  const fs::path dir = fixture::scratch("sing_test_cli_pipeline");
  sing::Rng rng(3);
  for (int i = 0; i < 3; ++i)
    fixture::write_bytes(dir / "midi" / ("m" + std::to_string(i) + ".mid"), fixture::motif_midi(rng, 28, 4));
  const auto pre = cli("preprocess --in " + (dir / "midi").string() + " --out " + (dir / "corpus").string(), dir);
  REQUIRE(pre.status == 0);
  std::size_t prolls = 0, ssms = 0;
  for (const auto& e : fs::directory_iterator(dir / "corpus")) {
    prolls += e.path().extension() == ".proll";
    ssms += e.path().extension() == ".ssm";
  }
  CHECK(prolls == 3);
  CHECK(ssms == 3);

  {
    std::ofstream conf(dir / "desk.conf");
    conf << "hidden_size = 4\nseed_len = 4\nepochs = 1\ngrid.k = 1\ngrid.count = 4\ngrid.max_len = 64\n";
  }
  const std::string conf = " --config " + (dir / "desk.conf").string();
  REQUIRE(cli("batch-plan --seed 1 --in " + (dir / "corpus").string() + " --out " + (dir / "plan.txt").string() + conf, dir).status == 0);
  const auto train = cli("train --seed 1 --epochs 2 --in " + (dir / "corpus").string() + " --plan " +
                             (dir / "plan.txt").string() + " --out " + (dir / "run").string() + conf,
                         dir);
  REQUIRE(train.status == 0);
  CHECK(fs::exists(dir / "run" / "epoch_2.ckpt"));
  CHECK(sing::decode_checkpoint(sing::read_file(dir / "run" / "best.ckpt")).config().hidden_size == 4);

  const std::string gen = "generate --seed 4 --checkpoint " + (dir / "run" / "best.ckpt").string() +
                          " --in " + (dir / "corpus" / "m0.proll").string() + " --template " +
                          (dir / "corpus" / "m1.ssm").string();
  REQUIRE(cli(gen + " --out " + (dir / "a.mid").string(), dir).status == 0);
  REQUIRE(cli(gen + " --out " + (dir / "b.mid").string(), dir).status == 0);
  CHECK(fixture::slurp(dir / "a.proll") == fixture::slurp(dir / "b.proll"));
  CHECK(fixture::slurp(dir / "a.mid") == fixture::slurp(dir / "b.mid"));

  SUBCASE("the config seed applies unless --seed is given") {
    {
      std::ofstream seeded(dir / "seeded.conf");
      seeded << fixture::slurp(dir / "desk.conf") << "seed = 9\n";
    }
    const std::string corpus = " --in " + (dir / "corpus").string();
    const std::string seeded = " --config " + (dir / "seeded.conf").string();
    REQUIRE(cli("batch-plan" + corpus + seeded + " --out " + (dir / "p_conf.txt").string(), dir).status == 0);
    REQUIRE(cli("batch-plan --seed 9" + corpus + conf + " --out " + (dir / "p_flag.txt").string(), dir).status == 0);
    REQUIRE(cli("batch-plan --seed 8" + corpus + seeded + " --out " + (dir / "p_both.txt").string(), dir).status == 0);
    REQUIRE(cli("batch-plan --seed 8" + corpus + conf + " --out " + (dir / "p_8.txt").string(), dir).status == 0);
    CHECK(fixture::slurp(dir / "p_conf.txt") == fixture::slurp(dir / "p_flag.txt"));
    CHECK(fixture::slurp(dir / "p_both.txt") == fixture::slurp(dir / "p_8.txt"));
  }

  const auto ev = cli("evaluate --random --seed 2 --in " + (dir / "corpus").string() + " --out " +
                          (dir / "eval.csv").string(),
                      dir);
  CHECK(ev.status == 0);
  CHECK(fixture::slurp(dir / "eval.csv").find("# summary") != std::string::npos);
  fs::remove_all(dir);
}
