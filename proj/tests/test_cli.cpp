#include "doctest.h"

#include <cstdlib>
#include <sstream>

#include "dekompost/cli.h"
#include "test_util.h"

namespace {

const std::string kData = DEKOMPOST_TEST_DATA;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "dekompost");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = dekompost::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string result_line(const std::string& out) {
  const auto p = out.find("RESULT ");
  REQUIRE(p != std::string::npos);
  return out.substr(p, out.find('\n', p) - p);
}

}  // namespace

TEST_CASE("exit codes and help") {
  auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("File formats") != std::string::npos);
  auto sub_help = run({"idiom", "featurize", "--help"});
  CHECK(sub_help.code == 0);
  CHECK(sub_help.out.find("--oov") != std::string::npos);
  CHECK(sub_help.out.find("vector file") != std::string::npos);

  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"split", "eval", "--data", kData + "/compounds.tsv"}).code == 1);
  CHECK(run({"split", "eval", "--method", "secos", "--data", kData + "/compounds.tsv"}).code == 1);
  CHECK(run({"split", "eval", "--method", "neural", "--data", kData + "/compounds.tsv"}).code == 1);

  test_util::TempDir dir("cli");
  auto bad = dir.file("bad.tsv", "Arbeitstag\tArbeit\n");
  auto r = run({"corpus", "stats", "--data", bad.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 1: expected 3 or 4 columns, got 2") != std::string::npos);
  CHECK(run({"corpus", "stats", "--data", (dir / "missing.tsv").string()}).code == 2);
}

TEST_CASE("every run prints its resolved config and seed") {
  auto r = run({"corpus", "stats", "--data", kData + "/compounds.tsv"});
  CHECK(r.code == 0);
  CHECK(r.err.find("config: data = " + kData + "/compounds.tsv") != std::string::npos);
  CHECK(r.err.find("config: seed = 13") != std::string::npos);
  CHECK(result_line(r.out).rfind("RESULT entries=40 ", 0) == 0);
}

TEST_CASE("split eval prints a machine-readable accuracy line") {
  auto r = run({"split", "eval", "--method", "frequency", "--data", kData + "/compounds.tsv", "--train",
                kData + "/compounds.tsv"});
  CHECK(r.code == 0);
  const auto line = result_line(r.out);
  CHECK(line.rfind("RESULT accuracy=", 0) == 0);
  CHECK(line.find(" n=40 dropped=0") != std::string::npos);

  auto again = run({"split", "eval", "--method", "frequency", "--data", kData + "/compounds.tsv", "--train",
                    kData + "/compounds.tsv"});
  CHECK(again.out == r.out);
}

TEST_CASE("split run") {
  auto r = run({"split", "run", "--method", "frequency", "--train", kData + "/compounds.tsv", "Arbeitstag", "ab"});
  CHECK(r.code == 0);
  CHECK(r.out.find("Arbeitstag\tArbeits|tag\tfrequency\t") == 0);
  CHECK(r.out.find("ab\tab\tnone\t0\n") != std::string::npos);
}

TEST_CASE("dummy idiomaticity baseline") {
  auto r = run({"idiom", "eval", "--classifier", "dummy", "--data", kData + "/annotated.tsv"});
  CHECK(r.code == 0);
  const double p = 7.0 / 12.0;
  CHECK(result_line(r.out).find("positives=7") != std::string::npos);
  const auto line = result_line(r.out);
  const double f1 = std::stod(line.substr(line.find("f1=") + 3));
  CHECK(f1 == doctest::Approx(2 * p / (1 + p)).epsilon(1e-15));
}

TEST_CASE("config file values sit below command-line flags") {
  test_util::TempDir dir("cfg");
  auto cfg = dir.file("run.cfg", "# partition\ntrain_ratio = 0.5\ndev-ratio = 0.25\ntest_ratio = 0.25\nseed = 3\nnoise = 1\n");
  auto r = run({"corpus", "partition", "--config", cfg.string(), "--data", kData + "/compounds.tsv", "--out",
                (dir / "p").string(), "--seed", "4"});
  CHECK(r.code == 0);
  CHECK(result_line(r.out) == "RESULT train=20 dev=10 test=10 seed=4");
  CHECK(r.err.find("warning: config key 'noise' is not used by this command") != std::string::npos);
  CHECK(test_util::slurp(dir / "p" / "dev.tsv").find('\n') != std::string::npos);

  ::setenv("DEKOMPOST_SEED", "21", 1);
  auto env = run({"corpus", "partition", "--data", kData + "/compounds.tsv", "--out", (dir / "q").string()});
  auto cfg_wins = run({"corpus", "partition", "--config", cfg.string(), "--data", kData + "/compounds.tsv", "--out",
                       (dir / "q").string()});
  ::unsetenv("DEKOMPOST_SEED");
  CHECK(result_line(env.out).find("seed=21") != std::string::npos);
  CHECK(result_line(cfg_wins.out).find("seed=3") != std::string::npos);
  CHECK(run({"corpus", "partition", "--data", kData + "/compounds.tsv", "--out", (dir / "q").string(),
             "--train-ratio", "0.9"})
            .code == 1);
}

TEST_CASE("training commands are bitwise reproducible") {
  test_util::TempDir dir("repro");
  for (const auto* tok : {"char", "bpe"}) {
    std::vector<std::string> args{"split",      "train",  "--train", kData + "/compounds.tsv", "--hidden", "8",
                                  "--embed-dim", "4",     "--epochs", "3", "--tokenizer", tok, "--bpe-vocab", "60"};
    auto a = args, b = args;
    a.insert(a.end(), {"--out", (dir / "a").string()});
    b.insert(b.end(), {"--out", (dir / "b").string()});
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    CHECK(test_util::slurp(dir / "a" / "model.dkmp") == test_util::slurp(dir / "b" / "model.dkmp"));
    CHECK(test_util::slurp(dir / "a" / "best.dkmp") == test_util::slurp(dir / "b" / "best.dkmp"));
    CHECK(test_util::slurp(dir / "a" / "train.log") == test_util::slurp(dir / "b" / "train.log"));
    auto eval = run({"split", "eval", "--method", "neural", "--model", (dir / "a" / "model.dkmp").string(), "--data",
                     kData + "/compounds.tsv"});
    CHECK(eval.code == 0);
    CHECK(result_line(eval.out).find(" n=40 dropped=0") != std::string::npos);
  }

  auto feats = (dir / "f.tsv").string();
  REQUIRE(run({"idiom", "featurize", "--data", kData + "/annotated.tsv", "--vectors", kData + "/vectors.vec",
               "--out", feats})
              .code == 0);
  for (const auto* clf : {"logreg", "gbdt"}) {
    const auto a = (dir / (std::string(clf) + "_a.dkmp")).string();
    const auto b = (dir / (std::string(clf) + "_b.dkmp")).string();
    REQUIRE(run({"idiom", "train", "--features", feats, "--classifier", clf, "--min-leaf", "2", "--out", a}).code == 0);
    REQUIRE(run({"idiom", "train", "--features", feats, "--classifier", clf, "--min-leaf", "2", "--out", b}).code == 0);
    CHECK(test_util::slurp(a) == test_util::slurp(b));
    auto eval = run({"idiom", "eval", "--classifier", clf, "--features", feats, "--model", a});
    CHECK(eval.code == 0);
    CHECK(result_line(eval.out).find(" n=12 positives=7") != std::string::npos);
  }
}

TEST_CASE("neural provenance featurization and error reports") {
  test_util::TempDir dir("pipe");
  REQUIRE(run({"split", "train", "--train", kData + "/compounds.tsv", "--hidden", "16", "--embed-dim", "8",
               "--epochs", "40", "--batch-size", "8", "--lr", "0.01", "--out", (dir / "m").string()})
              .code == 0);
  auto feats = (dir / "f.tsv").string();
  auto r = run({"idiom", "featurize", "--data", kData + "/annotated.tsv", "--vectors", kData + "/vectors.vec",
                "--provenance", "neural", "--split-model", (dir / "m" / "best.dkmp").string(), "--oov", "zero",
                "--out", feats});
  CHECK(r.code == 0);
  CHECK(result_line(r.out).find("rows=12 dim=9") != std::string::npos);
  CHECK(test_util::slurp(feats).rfind("# dim=9 order=compound|modifier|head provenance=neural\n", 0) == 0);
  CHECK(run({"idiom", "featurize", "--data", kData + "/annotated.tsv", "--vectors", kData + "/vectors.vec",
             "--provenance", "neural", "--out", feats})
            .code == 1);

  REQUIRE(run({"idiom", "train", "--features", feats, "--out", (dir / "lr.dkmp").string()}).code == 0);
  auto preds = (dir / "p.tsv").string();
  REQUIRE(run({"idiom", "predict", "--model", (dir / "lr.dkmp").string(), "--features", feats, "--out", preds}).code == 0);
  auto report = run({"report", "errors", "--data", kData + "/compounds.tsv", "--method", "ngram", "--train",
                     kData + "/compounds.tsv", "--annotated", kData + "/annotated.tsv", "--predictions", preds});
  CHECK(report.code == 0);
  CHECK(report.out.find("errors out of 40") != std::string::npos);
  CHECK(report.out.find("reference split accuracy") != std::string::npos);
  CHECK(run({"report", "errors", "--annotated", kData + "/annotated.tsv", "--predictions",
             kData + "/compounds.tsv"})
            .code == 2);
}
