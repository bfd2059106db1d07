#include "pmri/config.hpp"

#include <cctype>

#include "json.hpp"
#include "pmri/io.hpp"

namespace pmri {

using nlohmann::json;

void RunConfig::validate() const {
  if (patch_size < 1) throw config_error("patch_size out of range");
  if (patch_stride < 1 || patch_stride > patch_size)
    throw config_error("patch_stride out of range");
  if (lambda <= 0.0) throw config_error("lambda out of range");
  if (unroll_iters < 0) throw config_error("unroll_iters out of range");
  if (alpha < 0.0 || alpha >= 1.0) throw config_error("alpha out of range");
  if (eps_initial_scale <= 0.0)
    throw config_error("eps_initial_scale out of range");
  if (eps_min_scale <= 0.0) throw config_error("eps_min_scale out of range");
  if (cg_tol <= 0.0) throw config_error("cg_tol out of range");
  if (cg_max_iters < 1) throw config_error("cg_max_iters out of range");
  if (learning_rate < 0.0) throw config_error("learning_rate out of range");
  if (epochs < 0) throw config_error("epochs out of range");
  if (labelled_fraction <= 0.0 || labelled_fraction > 1.0)
    throw config_error("labelled_fraction out of range");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0)
    throw config_error("adam_beta1 out of range");
  if (adam_beta2 < 0.0 || adam_beta2 >= 1.0)
    throw config_error("adam_beta2 out of range");
  if (adam_eps <= 0.0) throw config_error("adam_eps out of range");
  if (net_width1 < 1 || net_width2 < 1 || net_width3 < 1)
    throw config_error("net_width out of range");
  if (rank_threshold <= 0.0 || rank_threshold >= 1.0)
    throw config_error("rank_threshold out of range");
}

std::string RunConfig::to_json() const {
  json j = {{"patch_size", patch_size},
            {"patch_stride", patch_stride},
            {"lambda", lambda},
            {"unroll_iters", unroll_iters},
            {"alpha", alpha},
            {"eps_initial_scale", eps_initial_scale},
            {"eps_min_scale", eps_min_scale},
            {"cg_tol", cg_tol},
            {"cg_max_iters", cg_max_iters},
            {"learning_rate", learning_rate},
            {"epochs", epochs},
            {"seed", seed},
            {"labelled_fraction", labelled_fraction},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"net_width1", net_width1},
            {"net_width2", net_width2},
            {"net_width3", net_width3},
            {"rank_threshold", rank_threshold}};
  return j.dump(2);
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw config_error(std::string("malformed value for key ") + key);
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  bool blank = true;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
  if (blank) return cfg;

  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw config_error("config is not valid JSON");
  if (!j.is_object()) throw config_error("config must be a JSON object");

  static const char* known[] = {
      "patch_size",    "patch_stride",   "lambda",
      "unroll_iters",  "alpha",          "eps_initial_scale",
      "eps_min_scale", "cg_tol",         "cg_max_iters",
      "learning_rate", "epochs",         "seed",
      "labelled_fraction", "adam_beta1", "adam_beta2",
      "adam_eps",      "net_width1",     "net_width2",
      "net_width3",    "rank_threshold"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw config_error("unknown config key " + it.key());
  }

  take(j, "patch_size", cfg.patch_size);
  take(j, "patch_stride", cfg.patch_stride);
  take(j, "lambda", cfg.lambda);
  take(j, "unroll_iters", cfg.unroll_iters);
  take(j, "alpha", cfg.alpha);
  take(j, "eps_initial_scale", cfg.eps_initial_scale);
  take(j, "eps_min_scale", cfg.eps_min_scale);
  take(j, "cg_tol", cfg.cg_tol);
  take(j, "cg_max_iters", cfg.cg_max_iters);
  take(j, "learning_rate", cfg.learning_rate);
  take(j, "epochs", cfg.epochs);
  take(j, "seed", cfg.seed);
  take(j, "labelled_fraction", cfg.labelled_fraction);
  take(j, "adam_beta1", cfg.adam_beta1);
  take(j, "adam_beta2", cfg.adam_beta2);
  take(j, "adam_eps", cfg.adam_eps);
  take(j, "net_width1", cfg.net_width1);
  take(j, "net_width2", cfg.net_width2);
  take(j, "net_width3", cfg.net_width3);
  take(j, "rank_threshold", cfg.rank_threshold);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

}  // namespace pmri
