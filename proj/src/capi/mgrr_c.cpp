// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <iostream>
#include <mutex>
#include <sstream>

#include "common/csv.hpp"
#include "mgrr/app.hpp"
#include "mgrr/error.hpp"
#include "mgrr/mgrr.h"

struct mgrr_config {
  mgrr::RunConfig cfg;
};

struct mgrr_model {
  mgrr::Checkpoint ckpt;
  std::unique_ptr<mgrr::Model> model;
};

struct mgrr_report {
  mgrr::eval::MetricReport report;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
mgrr_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

// Buffers command output and forwards it to the log sink on sync.
class LogBuf : public std::stringbuf {
 public:
  int sync() override {
    const auto text = str();
    if (!text.empty()) {
      std::lock_guard lock(g_log_mutex);
      if (g_log_fn) g_log_fn(text.c_str(), g_log_user);
      else std::cerr << text << std::flush;
    }
    str("");
    return 0;
  }
  ~LogBuf() override { sync(); }
};

struct LogStream {
  LogBuf buf;
  std::ostream os{&buf};
  ~LogStream() { os.flush(); }
};

mgrr_status fail(mgrr_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
mgrr_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return MGRR_OK;
  } catch (const mgrr::eval::UndefinedMetricError& e) {
    return fail(MGRR_ERR_METRIC, e.what());
  } catch (const mgrr::ParseError& e) {
    return fail(MGRR_ERR_PARSE, e.what());
  } catch (const mgrr::ManifestError& e) {
    return fail(MGRR_ERR_MANIFEST, e.what());
  } catch (const mgrr::SpecError& e) {
    return fail(MGRR_ERR_SPEC, e.what());
  } catch (const mgrr::DimensionError& e) {
    return fail(MGRR_ERR_DIMENSION, e.what());
  } catch (const mgrr::DivergenceError& e) {
    return fail(MGRR_ERR_NUMERIC, e.what());
  } catch (const mgrr::ContractError& e) {
    return fail(MGRR_ERR_NUMERIC, e.what());
  } catch (const mgrr::InputError& e) {
    return fail(MGRR_ERR_INPUT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(MGRR_ERR_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(MGRR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MGRR_ERR_INTERNAL, "unknown error");
  }
}

#define MGRR_REQUIRE(cond, what) \
  if (!(cond)) return fail(MGRR_ERR_ARGUMENT, what)

std::vector<std::string> split_tags(const char* text) {
  std::vector<std::string> out;
  if (!text || !*text) return out;
  for (auto& t : mgrr::csv::split(text, ','))
    if (!t.empty()) out.push_back(t);
  return out;
}

}  // namespace

extern "C" {

const char* mgrr_last_error(void) { return g_last_error.c_str(); }

const char* mgrr_status_name(mgrr_status s) {
  switch (s) {
    case MGRR_OK: return "ok";
    case MGRR_ERR_ARGUMENT: return "argument error";
    case MGRR_ERR_INPUT: return "input error";
    case MGRR_ERR_PARSE: return "parse error";
    case MGRR_ERR_SPEC: return "config error";
    case MGRR_ERR_MANIFEST: return "manifest error";
    case MGRR_ERR_DIMENSION: return "dimension error";
    case MGRR_ERR_NUMERIC: return "numerical error";
    case MGRR_ERR_METRIC: return "undefined metric";
    case MGRR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mgrr_version(void) { return "0.1.0"; }

void mgrr_set_log(mgrr_log_fn fn, void* user) {
  std::lock_guard lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

mgrr_status mgrr_config_new(mgrr_config** out) {
  MGRR_REQUIRE(out, "null output handle");
  return guarded([&] { *out = new mgrr_config(); });
}

void mgrr_config_free(mgrr_config* cfg) { delete cfg; }

mgrr_status mgrr_config_load(mgrr_config* cfg, const char* path) {
  MGRR_REQUIRE(cfg && path, "null argument");
  return guarded([&] { cfg->cfg.load_file(path); });
}

mgrr_status mgrr_config_set(mgrr_config* cfg, const char* key, const char* value) {
  MGRR_REQUIRE(cfg && key && value, "null argument");
  return guarded([&] { cfg->cfg.set(key, value); });
}

mgrr_status mgrr_config_assign(mgrr_config* cfg, const char* assignment) {
  MGRR_REQUIRE(cfg && assignment, "null argument");
  return guarded([&] { cfg->cfg.set_assignment(assignment); });
}

mgrr_status mgrr_config_get(const mgrr_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  MGRR_REQUIRE(cfg && key, "null argument");
  std::string value;
  const auto s = guarded([&] { value = cfg->cfg.get(key); });
  if (s != MGRR_OK) return s;
  if (needed) *needed = value.size() + 1;
  if (!buf || cap < value.size() + 1) return fail(MGRR_ERR_ARGUMENT, "buffer too small");
  std::memcpy(buf, value.c_str(), value.size() + 1);
  return MGRR_OK;
}

mgrr_status mgrr_config_write(const mgrr_config* cfg, const char* path) {
  MGRR_REQUIRE(cfg && path, "null argument");
  return guarded([&] { cfg->cfg.write_file(path); });
}

size_t mgrr_config_key_count(void) { return mgrr::config_schema().size(); }

const char* mgrr_config_key_name(size_t i) {
  return i < mgrr::config_schema().size() ? mgrr::config_schema()[i].name : nullptr;
}

const char* mgrr_config_key_default(size_t i) {
  return i < mgrr::config_schema().size() ? mgrr::config_schema()[i].default_value : nullptr;
}

const char* mgrr_config_key_help(size_t i) {
  return i < mgrr::config_schema().size() ? mgrr::config_schema()[i].help : nullptr;
}

mgrr_status mgrr_generate(const mgrr_config* cfg, const char* out_dir, int force) {
  MGRR_REQUIRE(cfg && out_dir, "null argument");
  return guarded([&] {
    LogStream log;
    mgrr::app::cmd_generate(cfg->cfg, out_dir, force != 0, log.os);
  });
}

mgrr_status mgrr_prior(const char* labels_csv, const char* out_csv, double smoothing) {
  MGRR_REQUIRE(labels_csv && out_csv, "null argument");
  return guarded([&] {
    LogStream log;
    mgrr::app::cmd_prior(labels_csv, out_csv, smoothing, log.os);
  });
}

mgrr_status mgrr_train(const mgrr_config* cfg, const char* data_dir, const char* run_dir, int resume, int force) {
  MGRR_REQUIRE(cfg && data_dir && run_dir, "null argument");
  return guarded([&] {
    LogStream log;
    mgrr::app::cmd_train(cfg->cfg, data_dir, run_dir, resume != 0, force != 0, log.os);
  });
}

mgrr_status mgrr_eval(const char* checkpoint_dir, const char* data_dir, const char* split, const char* out_csv,
                      mgrr_report** out) {
  MGRR_REQUIRE(checkpoint_dir && data_dir, "null argument");
  const std::string which = split ? split : "all";
  MGRR_REQUIRE(which == "all" || which == "train" || which == "test", "split must be all, train or test");
  return guarded([&] {
    LogStream log;
    auto report = mgrr::app::cmd_eval(checkpoint_dir, data_dir, which,
                                      out_csv ? std::filesystem::path(out_csv) : std::filesystem::path(), log.os);
    if (out) *out = new mgrr_report{std::move(report)};
  });
}

mgrr_status mgrr_ablate(const mgrr_config* cfg, const char* data_dir, const char* out_dir, const char* variants,
                        int force) {
  MGRR_REQUIRE(cfg && data_dir && out_dir, "null argument");
  return guarded([&] {
    LogStream log;
    mgrr::app::cmd_ablate(cfg->cfg, data_dir, out_dir, split_tags(variants), force != 0, log.os);
  });
}

mgrr_status mgrr_inspect(const char* checkpoint_dir, const char* data_dir, const char* out_dir, size_t probe_count) {
  MGRR_REQUIRE(checkpoint_dir && out_dir, "null argument");
  return guarded([&] {
    LogStream log;
    mgrr::app::cmd_inspect(checkpoint_dir, data_dir ? std::filesystem::path(data_dir) : std::filesystem::path(),
                           out_dir, probe_count, log.os);
  });
}

size_t mgrr_report_aus(const mgrr_report* r) { return r ? r->report.aus() : 0; }

double mgrr_report_f1(const mgrr_report* r, size_t au) {
  return r && au < r->report.aus() ? r->report.f1[au] : 0.0;
}

double mgrr_report_accuracy(const mgrr_report* r, size_t au) {
  return r && au < r->report.aus() ? r->report.accuracy[au] : 0.0;
}

mgrr_status mgrr_report_auc(const mgrr_report* r, size_t au, double* out) {
  MGRR_REQUIRE(r && out && au < r->report.aus(), "bad report query");
  if (!r->report.auc[au]) return fail(MGRR_ERR_METRIC, "AUC undefined: single-class ground truth");
  *out = *r->report.auc[au];
  return MGRR_OK;
}

double mgrr_report_avg_f1(const mgrr_report* r) { return r ? r->report.avg_f1 : 0.0; }
double mgrr_report_avg_accuracy(const mgrr_report* r) { return r ? r->report.avg_accuracy : 0.0; }
double mgrr_report_avg_auc(const mgrr_report* r) { return r ? r->report.avg_auc : 0.0; }
double mgrr_report_landmark_error(const mgrr_report* r) { return r ? r->report.mean_landmark_error_pct : 0.0; }
void mgrr_report_free(mgrr_report* r) { delete r; }

mgrr_status mgrr_model_load(const char* checkpoint_dir, mgrr_model** out) {
  MGRR_REQUIRE(checkpoint_dir && out, "null argument");
  return guarded([&] {
    auto m = std::make_unique<mgrr_model>();
    m->ckpt = mgrr::load_checkpoint(checkpoint_dir);
    m->model = std::make_unique<mgrr::Model>(m->ckpt.config.model(), &m->ckpt.prior, 0);
    mgrr::restore_parameters(m->ckpt, *m->model);
    *out = m.release();
  });
}

void mgrr_model_free(mgrr_model* m) { delete m; }

size_t mgrr_model_aus(const mgrr_model* m) { return m ? m->model->config().aus : 0; }
size_t mgrr_model_landmarks(const mgrr_model* m) { return m ? m->model->config().landmarks : 0; }
size_t mgrr_model_image_size(const mgrr_model* m) { return m ? m->model->config().image_size : 0; }
size_t mgrr_model_image_channels(const mgrr_model* m) { return m ? m->model->config().image_channels : 0; }

mgrr_status mgrr_model_predict(const mgrr_model* m, const double* image, size_t image_len, const double* landmarks,
                               size_t landmark_len, double* probs, double* landmarks_out) {
  MGRR_REQUIRE(m && image && landmarks && probs, "null argument");
  const auto& c = m->model->config();
  if (image_len != c.image_channels * c.image_size * c.image_size) {
    return fail(MGRR_ERR_DIMENSION, "image length does not match the model's input extents");
  }
  if (landmark_len != 2 * c.landmarks) return fail(MGRR_ERR_DIMENSION, "expected 2m landmark coordinates");
  const double limit = static_cast<double>(c.image_size) - 1.0;
  for (size_t i = 0; i < landmark_len; ++i) {
    if (!(landmarks[i] >= 0.0 && landmarks[i] <= limit)) {
      return fail(MGRR_ERR_INPUT, "landmark coordinate " + std::to_string(i) + " lies outside the image");
    }
  }
  return guarded([&] {
    mgrr::SampleRecord s;
    s.image = mgrr::Tensor({c.image_channels, c.image_size, c.image_size}, std::vector<double>(image, image + image_len));
    s.landmarks.assign(landmarks, landmarks + landmark_len);
    const auto pred = m->model->predict(s);
    std::copy(pred.p_final.begin(), pred.p_final.end(), probs);
    if (landmarks_out) std::copy(pred.landmarks.begin(), pred.landmarks.end(), landmarks_out);
  });
}

}  // extern "C"
