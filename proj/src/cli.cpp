#include "pmri/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmri/clear.hpp"
#include "pmri/config.hpp"
#include "pmri/io.hpp"
#include "pmri/metrics.hpp"
#include "pmri/parallel.hpp"
#include "pmri/phantom.hpp"
#include "pmri/png.hpp"
#include "pmri/unrolled.hpp"

namespace pmri {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string id_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "ds_%04d", i);
  return buf;
}

// The stored argv omits the --out pair so identical runs into
// different folders stay byte-identical; replay re-injects the
// destination from the manifest location.
json argv_json(const std::vector<std::string>& args) {
  json a = json::array();
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    a.push_back(args[i]);
  }
  return a;
}

std::vector<std::string> dataset_ids(const std::string& dir) {
  std::string manifest = dir + "/manifest.json";
  if (fs::exists(manifest)) {
    json m = json::parse(read_text_file(manifest));
    if (m.contains("datasets")) {
      std::vector<std::string> ids;
      for (const auto& d : m["datasets"]) ids.push_back(d.get<std::string>());
      return ids;
    }
  }
  std::vector<std::string> ids;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() &&
          fs::exists(e.path() / "manifest.json"))
        ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw io_error("no datasets found under " + dir);
  return ids;
}

double fmt2(double v) { return std::round(v * 100.0) / 100.0; }

// ---------------------------------------------------------------------------

struct GenerateOpts {
  std::string out;
  int count = 1;
  double accel = 6.0;
  int coils = 4;
  double noise = 0.01;
  uint64_t seed = 0;
  int size = 64;
  double center_fraction = 0.02;
  double density = 1.0;
  bool unlabelled = false;
};

int cmd_generate(const GenerateOpts& o, const std::vector<std::string>& argv) {
  PhantomSpec spec;
  spec.height = o.size;
  spec.width = o.size;
  AcquisitionConfig acq;
  acq.coils = o.coils;
  acq.noise_sigma = o.noise;
  acq.accel = o.accel;
  acq.center_fraction = o.center_fraction;
  acq.density_exponent = o.density;
  acq.validate();

  fs::create_directories(o.out);
  json datasets = json::array();
  json fractions = json::array();
  for (int i = 0; i < o.count; ++i) {
    uint64_t ds_seed = o.seed + uint64_t(i) * 9973;
    Dataset ds = make_dataset(spec, acq, ds_seed, !o.unlabelled);
    DatasetMeta meta;
    meta.seed = ds_seed;
    meta.accel = o.accel;
    meta.noise_sigma = o.noise;
    meta.center_fraction = o.center_fraction;
    meta.density_exponent = o.density;
    meta.sampled_fraction = ds.mask.sampled_fraction();
    save_dataset(o.out + "/" + id_name(i), ds, meta);
    datasets.push_back(id_name(i));
    fractions.push_back(meta.sampled_fraction);
    std::cout << id_name(i) << ": sampled_fraction="
              << meta.sampled_fraction << "\n";
  }
  json m = {{"command", "generate"},
            {"argv", argv_json(argv)},
            {"seed", o.seed},
            {"count", o.count},
            {"accel", o.accel},
            {"coils", o.coils},
            {"noise", o.noise},
            {"size", o.size},
            {"center_fraction", o.center_fraction},
            {"density", o.density},
            {"labelled", !o.unlabelled},
            {"sampled_fractions", fractions},
            {"datasets", datasets}};
  write_text_file(o.out + "/manifest.json", m.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct ReconstructOpts {
  std::string method;
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string config;
  int clear_iters = 15;
  double lambda = -1.0;  // <0: method default (0.01 for clear)
};

int cmd_reconstruct(const ReconstructOpts& o,
                    const std::vector<std::string>& argv) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.method == "idslr" && o.checkpoint.empty())
    throw config_error("idslr reconstruction requires --checkpoint");

  fs::create_directories(o.out);
  std::vector<std::string> ids = dataset_ids(o.data);

  UnrolledModel<float> model_f32;
  UnrolledModel<double> model_f64;
  bool use_f64 = false;
  if (o.method == "idslr") {
    std::string scalar = checkpoint_scalar(o.checkpoint);
    use_f64 = scalar == "f64";
    if (use_f64)
      model_f64 = load_checkpoint_f64(o.checkpoint);
    else
      model_f32 = load_checkpoint_f32(o.checkpoint);
  }

  json per_ds = json::array();
  for (const std::string& id : ids) {
    Dataset ds = load_dataset(o.data + "/" + id);
    ComplexImage recon;
    std::optional<LabelMap> seg;
    if (o.method == "zero-filled") {
      recon = sos(apply_adjoint(ds.kspace, ds.mask));
    } else if (o.method == "clear") {
      NormalizedSample s = normalize_sample(ds);
      PatchConfig pc{cfg.patch_size, cfg.patch_stride};
      IrlsOptions opts;
      opts.cg_tol = cfg.cg_tol;
      opts.cg_max_iters = cfg.cg_max_iters;
      opts.eps_initial_scale = cfg.eps_initial_scale;
      opts.eps_min_scale = cfg.eps_min_scale;
      double lam = o.lambda > 0.0 ? o.lambda : 0.01;
      auto [img, state] = clear_reconstruct(s.b, s.mask, lam, pc,
                                            o.clear_iters, opts);
      recon = sos(img);
      for (cplx& v : recon.data) v *= s.scale;
    } else {  // idslr
      if (use_f64) {
        auto r = model_infer(model_f64, ds);
        recon = std::move(r.sos_img);
        seg = std::move(r.seg);
      } else {
        auto r = model_infer(model_f32, ds);
        recon = std::move(r.sos_img);
        seg = std::move(r.seg);
      }
    }
    write_tensor(o.out + "/recon_" + id + ".pmri", recon);
    double lo = 1e300, hi = -1e300;
    for (const cplx& v : ds.reference.data) {
      lo = std::min(lo, v.real());
      hi = std::max(hi, v.real());
    }
    write_png_image(o.out + "/recon_" + id + ".png", recon, lo, hi);
    if (seg) {
      write_tensor(o.out + "/seg_" + id + ".pmri", *seg);
      write_png_labels(o.out + "/seg_" + id + ".png", *seg);
    }
    double snr = snr_db(recon, ds.reference);
    std::cout << id << ": snr_db=" << fmt2(snr) << "\n";
    per_ds.push_back({{"id", id}, {"snr_db", snr}});
  }
  json m = {{"command", "reconstruct"},
            {"argv", argv_json(argv)},
            {"method", o.method},
            {"data", o.data},
            {"results", per_ds}};
  if (!o.checkpoint.empty()) m["checkpoint"] = o.checkpoint;
  write_text_file(o.out + "/manifest.json", m.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string mode = "joint";
  std::string data;
  std::string out;
  std::string config;
  double labelled_fraction = 1.0;
  int epochs = -1;       // -1: take from config
  int64_t seed = -1;     // -1: take from config
  double alpha = -1.0;   // <0: take from config
  bool f64 = false;
};

template <typename T>
int train_run(const TrainOpts& o, const RunConfig& cfg,
              const std::vector<std::string>& argv,
              const std::vector<Dataset>& datasets) {
  int coils = datasets[0].kspace.coils;
  UnrolledModel<T> model =
      make_model<T>(mode_from_name(o.mode), coils, kNumClasses, cfg.net_width1,
                    cfg.net_width2, cfg.net_width3, cfg.unroll_iters,
                    cfg.lambda, cfg.seed);
  TrainConfig tc;
  tc.alpha = cfg.alpha;
  tc.learning_rate = cfg.learning_rate;
  tc.beta1 = cfg.adam_beta1;
  tc.beta2 = cfg.adam_beta2;
  tc.adam_eps = cfg.adam_eps;
  tc.epochs = cfg.epochs;
  tc.labelled_fraction = cfg.labelled_fraction;
  tc.seed = cfg.seed;
  TrainResult res = train(datasets, model, tc);

  save_checkpoint(o.out + "/checkpoint.pmrc", model);
  std::string csv = "epoch,loss\n";
  for (size_t e = 0; e < res.epoch_loss.size(); ++e) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.9e\n", e, res.epoch_loss[e]);
    csv += buf;
  }
  write_text_file(o.out + "/loss_trace.csv", csv);

  json labelled = json::array();
  for (int id : res.labelled_ids) labelled.push_back(id_name(id));
  json losses = json::array();
  for (double l : res.epoch_loss) losses.push_back(l);
  json m = {{"command", "train"},
            {"argv", argv_json(argv)},
            {"mode", o.mode},
            {"data", o.data},
            {"seed", tc.seed},
            {"config", json::parse(cfg.to_json())},
            {"labelled_ids", labelled},
            {"epoch_loss", losses},
            {"param_count", model.total_params()},
            {"scalar", o.f64 ? "f64" : "f32"}};
  write_text_file(o.out + "/manifest.json", m.dump(2) + "\n");
  std::cout << "trained " << o.mode << " for " << res.epoch_loss.size()
            << " epochs, params=" << model.total_params() << "\n";
  return 0;
}

int cmd_train(const TrainOpts& o, const std::vector<std::string>& argv) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  cfg.labelled_fraction = o.labelled_fraction;
  if (o.epochs >= 0) cfg.epochs = o.epochs;
  if (o.seed >= 0) cfg.seed = uint64_t(o.seed);
  if (o.alpha >= 0.0) cfg.alpha = o.alpha;
  cfg.validate();

  std::vector<std::string> ids = dataset_ids(o.data);
  std::vector<Dataset> datasets;
  datasets.reserve(ids.size());
  for (const std::string& id : ids)
    datasets.push_back(load_dataset(o.data + "/" + id));

  fs::create_directories(o.out);
  if (o.f64) return train_run<double>(o, cfg, argv, datasets);
  return train_run<float>(o, cfg, argv, datasets);
}

// ---------------------------------------------------------------------------

struct EvaluateOpts {
  std::string recon;
  std::string data;
  std::string out;
  bool seg = false;
};

int cmd_evaluate(const EvaluateOpts& o, const std::vector<std::string>& argv) {
  std::vector<std::string> ids = dataset_ids(o.data);
  std::string method = "unknown";
  std::string recon_manifest = o.recon + "/manifest.json";
  if (fs::exists(recon_manifest)) {
    json m = json::parse(read_text_file(recon_manifest));
    method = m.value("method", "unknown");
  }
  EvalReport rep;
  for (const std::string& id : ids) {
    std::string path = o.recon + "/recon_" + id + ".pmri";
    if (!fs::exists(path))
      throw io_error("mismatched dataset IDs: missing " + path);
    Dataset ds = load_dataset(o.data + "/" + id);
    ComplexImage recon = blob_to_image(read_blob(path));
    EvalRow row;
    row.dataset_id = id;
    row.method = method;
    row.snr = snr_db(recon, ds.reference);
    row.ssim_v = ssim(recon, ds.reference);
    if (o.seg) {
      std::string seg_path = o.recon + "/seg_" + id + ".pmri";
      if (fs::exists(seg_path) && ds.labels) {
        LabelMap seg = blob_to_labels(read_blob(seg_path));
        row.has_dice = true;
        row.dice_csf = dice(seg, *ds.labels, 1);
        row.dice_gm = dice(seg, *ds.labels, 2);
        row.dice_wm = dice(seg, *ds.labels, 3);
      }
    }
    rep.rows.push_back(std::move(row));
  }
  std::string out_path = o.out.empty() ? o.recon + "/eval.csv" : o.out;
  write_text_file(out_path, rep.to_csv());
  json m = {{"command", "evaluate"},
            {"argv", argv_json(argv)},
            {"recon", o.recon},
            {"data", o.data},
            {"csv", out_path}};
  write_text_file(out_path + ".manifest.json", m.dump(2) + "\n");

  for (const auto& mm : rep.method_means())
    std::cout << mm.method << ": mean snr_db="
              << (std::isinf(mm.snr) ? std::string("inf")
                                     : std::to_string(fmt2(mm.snr)))
              << " mean ssim=" << fmt2(mm.ssim_v)
              << (mm.has_dice
                      ? " mean dice=" + std::to_string(fmt2(mm.dice_mean))
                      : std::string())
              << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CompareOpts {
  std::vector<std::string> reports;
  std::string out;
};

int cmd_compare(const CompareOpts& o, const std::vector<std::string>& argv) {
  EvalReport merged;
  for (const std::string& path : o.reports) {
    EvalReport r = EvalReport::from_csv(read_text_file(path));
    merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
  }
  auto means = merged.method_means();
  std::cout << "method,mean_snr_db,mean_ssim,mean_dice,count\n";
  for (const auto& mm : means) {
    char buf[160];
    if (mm.has_dice)
      std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%d\n",
                    mm.method.c_str(), mm.snr, mm.ssim_v, mm.dice_mean,
                    mm.count);
    else
      std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,,%d\n", mm.method.c_str(),
                    mm.snr, mm.ssim_v, mm.count);
    std::cout << buf;
  }
  if (!o.out.empty()) {
    write_text_file(o.out, merged.to_csv());
    json m = {{"command", "compare"}, {"argv", argv_json(argv)}};
    write_text_file(o.out + ".manifest.json", m.dump(2) + "\n");
  }
  return 0;
}

int cmd_replay(const std::string& manifest_path, const std::string& out) {
  json m = json::parse(read_text_file(manifest_path));
  if (!m.contains("argv"))
    throw config_error("manifest has no argv record: " + manifest_path);
  std::vector<std::string> args;
  for (const auto& a : m["argv"]) args.push_back(a.get<std::string>());
  std::string dest = out;
  if (dest.empty()) {
    // Default destination: where the manifest lives. Evaluate/compare
    // manifests sit next to their CSV as <csv>.manifest.json.
    std::string tail = ".manifest.json";
    if (manifest_path.size() > tail.size() &&
        manifest_path.compare(manifest_path.size() - tail.size(), tail.size(),
                              tail) == 0)
      dest = manifest_path.substr(0, manifest_path.size() - tail.size());
    else
      dest = fs::path(manifest_path).parent_path().string();
  }
  args.push_back("--out");
  args.push_back(dest);
  return run_cli(args);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Calibrationless parallel MRI reconstruction lab"};
  app.require_subcommand(1);

  int threads = 1;
  bool deterministic = false;
  app.add_option("--threads", threads, "worker threads (default 1)");
  app.add_flag("--deterministic", deterministic,
               "force single-threaded execution");

  GenerateOpts g;
  CLI::App* gen = app.add_subcommand("generate", "write synthetic datasets");
  gen->add_option("--out", g.out, "output directory")->required();
  gen->add_option("--count", g.count, "number of datasets")
      ->check(CLI::PositiveNumber);
  gen->add_option("--accel", g.accel, "acceleration factor")
      ->check(CLI::Range(1.0, 12.0));
  gen->add_option("--coils", g.coils, "coil count")->check(CLI::Range(2, 64));
  gen->add_option("--noise", g.noise, "k-space noise sigma")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", g.seed, "master seed");
  gen->add_option("--size", g.size, "image side length")
      ->check(CLI::Range(16, 512));
  gen->add_option("--center-fraction", g.center_fraction,
                  "fully sampled center area fraction");
  gen->add_option("--density", g.density, "variable-density exponent");
  gen->add_flag("--unlabelled", g.unlabelled, "omit label maps");

  ReconstructOpts r;
  CLI::App* rec = app.add_subcommand("reconstruct", "reconstruct datasets");
  rec->add_option("--method", r.method, "zero-filled | clear | idslr")
      ->required()
      ->check(CLI::IsMember({"zero-filled", "clear", "idslr"}));
  rec->add_option("--data", r.data, "dataset directory")->required();
  rec->add_option("--checkpoint", r.checkpoint, "model checkpoint (idslr)");
  rec->add_option("--out", r.out, "output directory")->required();
  rec->add_option("--config", r.config, "run config JSON");
  rec->add_option("--iters", r.clear_iters, "outer iterations (clear)")
      ->check(CLI::PositiveNumber);
  rec->add_option("--lambda", r.lambda,
                  "regularization weight (clear; default 0.01)");

  TrainOpts t;
  CLI::App* tr = app.add_subcommand("train", "train the unrolled network");
  tr->add_option("--mode", t.mode, "joint | recon-only | cascade")
      ->check(CLI::IsMember({"joint", "recon-only", "cascade"}));
  tr->add_option("--data", t.data, "dataset directory")->required();
  tr->add_option("--out", t.out, "output directory")->required();
  tr->add_option("--config", t.config, "run config JSON");
  tr->add_option("--labelled-fraction", t.labelled_fraction,
                 "fraction of datasets with labels used")
      ->check(CLI::Range(1e-9, 1.0));
  tr->add_option("--epochs", t.epochs, "override config epochs");
  tr->add_option("--seed", t.seed, "override config seed");
  tr->add_option("--alpha", t.alpha, "override config alpha");
  tr->add_flag("--f64", t.f64, "train in double precision");

  EvaluateOpts e;
  CLI::App* ev = app.add_subcommand("evaluate", "score reconstructions");
  ev->add_option("--recon", e.recon, "reconstruction directory")->required();
  ev->add_option("--data", e.data, "dataset directory")->required();
  ev->add_option("--out", e.out, "output CSV path");
  ev->add_flag("--seg", e.seg, "also score segmentations");

  CompareOpts c;
  CLI::App* cp = app.add_subcommand("compare", "merge evaluation reports");
  cp->add_option("--reports", c.reports, "CSV reports")
      ->required()
      ->expected(-1);
  cp->add_option("--out", c.out, "merged CSV path");

  std::string replay_manifest;
  std::string replay_out;
  CLI::App* rp = app.add_subcommand("replay", "re-run a command from its manifest");
  rp->add_option("manifest", replay_manifest, "manifest.json path")
      ->required();
  rp->add_option("--out", replay_out, "override the output destination");

  std::vector<std::string> argv_copy = args;
  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp& h) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& pe) {
    std::cerr << "error: " << pe.what() << "\n";
    return 2;
  }

  set_threads(deterministic ? 1 : threads);
  try {
    if (gen->parsed()) return cmd_generate(g, argv_copy);
    if (rec->parsed()) return cmd_reconstruct(r, argv_copy);
    if (tr->parsed()) return cmd_train(t, argv_copy);
    if (ev->parsed()) return cmd_evaluate(e, argv_copy);
    if (cp->parsed()) return cmd_compare(c, argv_copy);
    if (rp->parsed()) return cmd_replay(replay_manifest, replay_out);
  } catch (const numeric_error& ex) {
    std::cerr << "numerical failure: " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace pmri
