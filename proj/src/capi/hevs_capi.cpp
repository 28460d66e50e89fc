#include "hevs/hevs.h"

#include <iostream>
#include <string>

#include "hevs/checkpoint.hpp"
#include "hevs/commands.hpp"
#include "hevs/config.hpp"
#include "hevs/error.hpp"
#include "hevs/evaluation.hpp"
#include "hevs/model.hpp"

struct hevs_raw {
  hevs::RawImage img;
};
struct hevs_rgb {
  hevs::RgbImage img;
};
struct hevs_model {
  hevs::DemosaicFormer net{nullptr};
  std::string snapshot;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_text;

hevs_status set_error(hevs_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
hevs_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return HEVS_OK;
  } catch (const hevs::Error& e) {
    return set_error(static_cast<hevs_status>(static_cast<int>(e.code())), e.what());
  } catch (const c10::Error& e) {
    return set_error(HEVS_ERR_INTERNAL, e.what_without_backtrace());
  } catch (const std::exception& e) {
    return set_error(HEVS_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(HEVS_ERR_INTERNAL, "unknown exception");
  }
}

#define HEVS_CHECK_ARG(cond) \
  if (!(cond)) return set_error(HEVS_ERR_INVALID_ARGUMENT, "invalid argument: " #cond)

hevs::Config make_config(const char* path, const char* const* overrides, size_t n) {
  hevs::Config cfg;
  if (path && *path) cfg.load_file(path);
  for (size_t i = 0; i < n; ++i) {
    hevs::require(overrides[i] != nullptr, hevs::ErrorCode::Config, "null override");
    cfg.apply_override(overrides[i]);
  }
  return cfg;
}

}  // namespace

extern "C" {

const char* hevs_last_error(void) { return g_last_error.c_str(); }

const char* hevs_status_name(hevs_status s) {
  switch (s) {
    case HEVS_OK: return "ok";
    case HEVS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case HEVS_ERR_INTERNAL: return "internal";
    default: break;
  }
  const int c = static_cast<int>(s);
  if (c >= 1 && c <= static_cast<int>(hevs::ErrorCode::EmptyReport))
    return hevs::error_code_name(static_cast<hevs::ErrorCode>(c));
  return "unknown";
}

const char* hevs_version(void) { return "0.1.0"; }

hevs_status hevs_raw_create(int height, int width, const uint16_t* samples, hevs_raw** out) {
  HEVS_CHECK_ARG(samples && out);
  return guard([&] {
    hevs::RawImage img(height, width);
    std::copy_n(samples, img.values.size(), img.values.begin());
    img.validate();
    *out = new hevs_raw{std::move(img)};
  });
}

hevs_status hevs_raw_read(const char* path, hevs_raw** out) {
  HEVS_CHECK_ARG(path && out);
  return guard([&] { *out = new hevs_raw{hevs::read_raw_bin(path)}; });
}

hevs_status hevs_raw_write(const hevs_raw* raw, const char* path) {
  HEVS_CHECK_ARG(raw && path);
  return guard([&] { hevs::write_raw_bin(raw->img, path); });
}

hevs_status hevs_raw_dims(const hevs_raw* raw, int* height, int* width) {
  HEVS_CHECK_ARG(raw && height && width);
  *height = raw->img.height;
  *width = raw->img.width;
  return HEVS_OK;
}

const uint16_t* hevs_raw_data(const hevs_raw* raw) { return raw ? raw->img.values.data() : nullptr; }

void hevs_raw_free(hevs_raw* raw) { delete raw; }

hevs_status hevs_rgb_create(int height, int width, const float* hwc, hevs_rgb** out) {
  HEVS_CHECK_ARG(hwc && out && height > 0 && width > 0);
  return guard([&] {
    hevs::RgbImage img(height, width);
    std::copy_n(hwc, img.values.size(), img.values.begin());
    *out = new hevs_rgb{std::move(img)};
  });
}

hevs_status hevs_rgb_read_png(const char* path, hevs_rgb** out) {
  HEVS_CHECK_ARG(path && out);
  return guard([&] { *out = new hevs_rgb{hevs::read_png(path)}; });
}

hevs_status hevs_rgb_write_png(const hevs_rgb* img, const char* path) {
  HEVS_CHECK_ARG(img && path);
  return guard([&] { hevs::write_png(img->img, path); });
}

hevs_status hevs_rgb_dims(const hevs_rgb* img, int* height, int* width) {
  HEVS_CHECK_ARG(img && height && width);
  *height = img->img.height;
  *width = img->img.width;
  return HEVS_OK;
}

const float* hevs_rgb_data(const hevs_rgb* img) { return img ? img->img.values.data() : nullptr; }

void hevs_rgb_free(hevs_rgb* img) { delete img; }

hevs_status hevs_extend_to_rgb(const hevs_raw* raw, hevs_rgb** out) {
  HEVS_CHECK_ARG(raw && out);
  return guard([&] { *out = new hevs_rgb{hevs::extend_to_rgb(raw->img)}; });
}

hevs_status hevs_mosaic(const hevs_rgb* img, hevs_raw** out) {
  HEVS_CHECK_ARG(img && out);
  return guard([&] { *out = new hevs_raw{hevs::mosaic(img->img, hevs::PatternSpec{})}; });
}

hevs_status hevs_bilinear_baseline(const hevs_raw* raw, hevs_rgb** out) {
  HEVS_CHECK_ARG(raw && out);
  return guard([&] { *out = new hevs_rgb{hevs::bilinear_baseline(raw->img)}; });
}

hevs_status hevs_model_create(const char* config_path, const char* init, uint64_t seed,
                              hevs_model** out) {
  HEVS_CHECK_ARG(out);
  return guard([&] {
    const hevs::Config cfg = make_config(config_path, nullptr, 0);
    auto m = std::make_unique<hevs_model>();
    m->net = hevs::build_variant(hevs::model_from(cfg));
    hevs::init_weights(*m->net, hevs::parse_init(init ? init : "residual_zero"), seed);
    m->net->eval();
    m->snapshot = cfg.dump();
    *out = m.release();
  });
}

hevs_status hevs_model_load(const char* checkpoint_path, hevs_model** out) {
  HEVS_CHECK_ARG(checkpoint_path && out);
  return guard([&] {
    auto m = std::make_unique<hevs_model>();
    m->net = hevs::load_model(hevs::Config{}, checkpoint_path);
    m->snapshot = hevs::load_checkpoint(checkpoint_path).config_snapshot;
    *out = m.release();
  });
}

hevs_status hevs_model_save(const hevs_model* model, const char* checkpoint_path) {
  HEVS_CHECK_ARG(model && checkpoint_path);
  return guard([&] {
    hevs::Checkpoint ck;
    ck.config_snapshot = model->snapshot;
    hevs::add_module_state(ck, *model->net);
    hevs::save_checkpoint(ck, checkpoint_path);
  });
}

hevs_status hevs_model_param_count(const hevs_model* model, int64_t* out) {
  HEVS_CHECK_ARG(model && out);
  return guard([&] { *out = hevs::count_params(*model->net); });
}

hevs_status hevs_model_forward(hevs_model* model, const hevs_raw* raw, int tile, int overlap,
                               hevs_rgb** out) {
  HEVS_CHECK_ARG(model && raw && out);
  return guard([&] {
    hevs::RgbImage pred = tile > 0 ? hevs::forward_tiled(model->net, raw->img, {tile, overlap})
                                   : hevs::forward(model->net, raw->img);
    *out = new hevs_rgb{std::move(pred)};
  });
}

void hevs_model_free(hevs_model* model) { delete model; }

hevs_status hevs_psnr(const hevs_rgb* pred, const hevs_rgb* gt, double* out) {
  HEVS_CHECK_ARG(pred && gt && out);
  return guard([&] { *out = hevs::psnr(pred->img, gt->img); });
}

hevs_status hevs_ssim(const hevs_rgb* pred, const hevs_rgb* gt, double* out) {
  HEVS_CHECK_ARG(pred && gt && out);
  return guard([&] { *out = hevs::ssim(pred->img, gt->img); });
}

hevs_status hevs_run_command(const char* verb, const char* config_path, const char* const* overrides,
                             size_t n_overrides, int* exit_code) {
  HEVS_CHECK_ARG(verb && exit_code && (overrides || n_overrides == 0));
  return guard([&] {
    const hevs::Config cfg = make_config(config_path, overrides, n_overrides);
    *exit_code = hevs::run_command(verb, cfg, std::cout, std::cerr);
    std::cout.flush();
  });
}

hevs_status hevs_dump_config(const char* config_path, const char* const* overrides,
                             size_t n_overrides, const char** out) {
  HEVS_CHECK_ARG(out && (overrides || n_overrides == 0));
  return guard([&] {
    g_text = make_config(config_path, overrides, n_overrides).dump();
    *out = g_text.c_str();
  });
}

}  // extern "C"
