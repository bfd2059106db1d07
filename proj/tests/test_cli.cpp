#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "pmri/cli.hpp"
#include "pmri/fourier.hpp"
#include "pmri/io.hpp"
#include "pmri/metrics.hpp"
#include "pmri/unrolled.hpp"
#include "support.hpp"

using namespace pmri;
using namespace pmri::test;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int cli(std::initializer_list<std::string> args) {
  return run_cli(std::vector<std::string>(args));
}

std::vector<std::string> tree_files(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file())
      out.push_back(fs::relative(e.path(), dir).string());
  std::sort(out.begin(), out.end());
  return out;
}

bool trees_identical(const std::string& a, const std::string& b) {
  auto fa = tree_files(a), fb = tree_files(b);
  if (fa != fb) return false;
  for (const std::string& rel : fa)
    if (read_text_file(a + "/" + rel) != read_text_file(b + "/" + rel))
      return false;
  return true;
}

}  // namespace

TEST_CASE("generate: identical runs produce byte-identical directories") {
  TempDir tmp("cli_gen");
  auto args = [&](const char* out) {
    return std::vector<std::string>{
        "generate", "--out", tmp.path(out), "--count", "2", "--accel", "4",
        "--coils", "2",      "--seed",      "7",       "--size", "16"};
  };
  CHECK(run_cli(args("a")) == 0);
  CHECK(run_cli(args("b")) == 0);
  CHECK(trees_identical(tmp.path("a"), tmp.path("b")));
}

TEST_CASE("generate: manifest records the sampled fraction near 1/accel") {
  TempDir tmp("cli_frac");
  CHECK(cli({"generate", "--out", tmp.path("d"), "--count", "1", "--accel",
             "6", "--seed", "3"}) == 0);
  json m = json::parse(read_text_file(tmp.path("d") + "/manifest.json"));
  double f = m["sampled_fractions"][0].get<double>();
  CHECK(f >= 0.157);
  CHECK(f <= 0.177);
}

TEST_CASE("generate: invalid acceleration exits with code 2") {
  TempDir tmp("cli_bad");
  CHECK(cli({"generate", "--out", tmp.path("d"), "--accel", "0"}) == 2);
  CHECK(cli({"generate", "--out", tmp.path("d"), "--accel", "44"}) == 2);
  CHECK(cli({"bogus-command"}) == 2);
}

TEST_CASE("replay: a manifest reproduces its run byte for byte") {
  TempDir tmp("cli_replay");
  CHECK(cli({"generate", "--out", tmp.path("a"), "--count", "1", "--seed",
             "5", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  CHECK(cli({"replay", tmp.path("a") + "/manifest.json", "--out",
             tmp.path("b")}) == 0);
  CHECK(trees_identical(tmp.path("a"), tmp.path("b")));
}

TEST_CASE("reconstruct: zero-filled output equals sos of the adjoint") {
  TempDir tmp("cli_zf");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "1", "--seed",
               "11", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  REQUIRE(cli({"reconstruct", "--method", "zero-filled", "--data",
               tmp.path("d"), "--out", tmp.path("r")}) == 0);
  Dataset ds = load_dataset(tmp.path("d") + "/ds_0000");
  ComplexImage want = sos(apply_adjoint(ds.kspace, ds.mask));
  ComplexImage got =
      blob_to_image(read_blob(tmp.path("r") + "/recon_ds_0000.pmri"));
  double worst = 0.0;
  for (size_t i = 0; i < got.data.size(); ++i)
    worst = std::max(worst, std::abs(got.data[i] - to_f32(want.data[i])));
  CHECK(worst == 0.0);
  CHECK(fs::exists(tmp.path("r") + "/recon_ds_0000.png"));
}

TEST_CASE("reconstruct: clear on fully sampled data logs > 60 dB") {
  TempDir tmp("cli_clear");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "1", "--seed",
               "13", "--size", "32", "--accel", "1", "--coils", "2",
               "--noise", "0"}) == 0);
  REQUIRE(cli({"reconstruct", "--method", "clear", "--data", tmp.path("d"),
               "--out", tmp.path("r"), "--iters", "2", "--lambda",
               "0.001"}) == 0);
  json m = json::parse(read_text_file(tmp.path("r") + "/manifest.json"));
  double snr = m["results"][0]["snr_db"].get<double>();
  MESSAGE("clear fully sampled snr_db = " << snr);
  CHECK(snr > 60.0);
}

TEST_CASE("reconstruct: idslr without a checkpoint exits with code 2") {
  TempDir tmp("cli_ck");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "1", "--seed",
               "15", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  CHECK(cli({"reconstruct", "--method", "idslr", "--data", tmp.path("d"),
             "--out", tmp.path("r")}) == 2);
}

TEST_CASE("train: recon-only checkpoints have no segmentation tensors") {
  TempDir tmp("cli_tr");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "2", "--seed",
               "17", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  write_text_file(tmp.path("cfg.json"),
                  "{\"net_width1\":4,\"net_width2\":8,\"net_width3\":16,"
                  "\"unroll_iters\":2,\"epochs\":2}");
  REQUIRE(cli({"train", "--mode", "recon-only", "--data", tmp.path("d"),
               "--out", tmp.path("t"), "--config", tmp.path("cfg.json")}) ==
          0);
  NamedBlobs blobs = read_container(tmp.path("t") + "/checkpoint.pmrc");
  for (const auto& [name, blob] : blobs.tensors)
    CHECK(name.find("psi") == std::string::npos);
  CHECK(fs::exists(tmp.path("t") + "/loss_trace.csv"));
}

TEST_CASE("train: labelled fraction is recorded as ceil(f*N) ids") {
  TempDir tmp("cli_few");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "5", "--seed",
               "19", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  write_text_file(tmp.path("cfg.json"),
                  "{\"net_width1\":4,\"net_width2\":8,\"net_width3\":16,"
                  "\"unroll_iters\":1,\"epochs\":1}");
  REQUIRE(cli({"train", "--mode", "joint", "--data", tmp.path("d"), "--out",
               tmp.path("t"), "--config", tmp.path("cfg.json"),
               "--labelled-fraction", "0.3"}) == 0);
  json m = json::parse(read_text_file(tmp.path("t") + "/manifest.json"));
  CHECK(m["labelled_ids"].size() == 2);  // ceil(0.3 * 5)
}

TEST_CASE("train: identical seeds give identical loss traces") {
  TempDir tmp("cli_det");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "2", "--seed",
               "21", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  write_text_file(tmp.path("cfg.json"),
                  "{\"net_width1\":4,\"net_width2\":8,\"net_width3\":16,"
                  "\"unroll_iters\":2,\"epochs\":3,\"seed\":4}");
  auto targs = [&](const char* out) {
    return std::vector<std::string>{
        "--deterministic", "train", "--mode", "joint",
        "--data", tmp.path("d"), "--out", tmp.path(out),
        "--config", tmp.path("cfg.json")};
  };
  REQUIRE(run_cli(targs("t1")) == 0);
  REQUIRE(run_cli(targs("t2")) == 0);
  CHECK(read_text_file(tmp.path("t1") + "/loss_trace.csv") ==
        read_text_file(tmp.path("t2") + "/loss_trace.csv"));
  CHECK(read_text_file(tmp.path("t1") + "/checkpoint.pmrc") ==
        read_text_file(tmp.path("t2") + "/checkpoint.pmrc"));
}

TEST_CASE("evaluate: the reference itself scores inf / 1.0 / 1.0") {
  TempDir tmp("cli_eval");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "1", "--seed",
               "23", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  Dataset ds = load_dataset(tmp.path("d") + "/ds_0000");
  fs::create_directories(tmp.path("r"));
  write_tensor(tmp.path("r") + "/recon_ds_0000.pmri", ds.reference);
  REQUIRE(ds.labelled());
  write_tensor(tmp.path("r") + "/seg_ds_0000.pmri", *ds.labels);
  REQUIRE(cli({"evaluate", "--recon", tmp.path("r"), "--data", tmp.path("d"),
               "--seg", "--out", tmp.path("e.csv")}) == 0);
  EvalReport rep = EvalReport::from_csv(read_text_file(tmp.path("e.csv")));
  REQUIRE(rep.rows.size() == 1);
  CHECK(std::isinf(rep.rows[0].snr));
  CHECK(rep.rows[0].ssim_v == 1.0);
  CHECK(rep.rows[0].dice_csf == 1.0);
  CHECK(rep.rows[0].dice_gm == 1.0);
  CHECK(rep.rows[0].dice_wm == 1.0);
}

TEST_CASE("evaluate: missing reconstructions exit with code 2") {
  TempDir tmp("cli_mismatch");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "2", "--seed",
               "25", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  fs::create_directories(tmp.path("r"));
  Dataset ds = load_dataset(tmp.path("d") + "/ds_0000");
  write_tensor(tmp.path("r") + "/recon_ds_0000.pmri", ds.reference);
  // ds_0001 has no reconstruction.
  CHECK(cli({"evaluate", "--recon", tmp.path("r"), "--data", tmp.path("d")}) ==
        2);
}

TEST_CASE("compare: merges reports sorted by mean SNR") {
  TempDir tmp("cli_cmp");
  EvalReport a, b;
  a.rows.push_back({"ds_0000", "slow", 10.0, 0.5, false, 0, 0, 0});
  b.rows.push_back({"ds_0000", "fast", 30.0, 0.9, false, 0, 0, 0});
  write_text_file(tmp.path("a.csv"), a.to_csv());
  write_text_file(tmp.path("b.csv"), b.to_csv());
  REQUIRE(cli({"compare", "--reports", tmp.path("a.csv"), tmp.path("b.csv"),
               "--out", tmp.path("m.csv")}) == 0);
  EvalReport merged = EvalReport::from_csv(read_text_file(tmp.path("m.csv")));
  CHECK(merged.rows.size() == 2);
  auto means = merged.method_means();
  CHECK(means[0].method == "fast");
}

TEST_CASE("golden: seeded toy evaluation matches the committed CSV") {
  TempDir tmp("cli_golden");
  REQUIRE(cli({"generate", "--out", tmp.path("d"), "--count", "2", "--seed",
               "100", "--size", "16", "--accel", "4", "--coils", "2"}) == 0);
  REQUIRE(cli({"reconstruct", "--method", "zero-filled", "--data",
               tmp.path("d"), "--out", tmp.path("r")}) == 0);
  REQUIRE(cli({"evaluate", "--recon", tmp.path("r"), "--data", tmp.path("d"),
               "--out", tmp.path("eval.csv")}) == 0);
  std::string got = read_text_file(tmp.path("eval.csv"));
  std::string want =
      read_text_file(std::string(PMRI_SOURCE_DIR) + "/tests/golden/eval_zero_filled.csv");
  CHECK(got == want);
}

TEST_CASE("cli binary: runs as a subprocess with proper exit codes") {
  std::string bin = PMRI_CLI_PATH;
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  int rc = std::system((bin + " generate --accel 0 --out /tmp/pmri_bad_accel"
                        " > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}
