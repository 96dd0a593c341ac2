#include "deepfgs/evalrun.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "deepfgs/codec.hpp"
#include "deepfgs/container.hpp"
#include "deepfgs/error.hpp"
#include "deepfgs/metrics.hpp"

namespace dfgs {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// levels {0, interval, 2·interval, …} with C2 always the last entry
std::vector<int> sweep_levels(int c2, int interval) {
  if (interval <= 0) throw UsageError("eval: interval must be > 0");
  std::vector<int> levels;
  for (int n = 0; n < c2; n += interval) levels.push_back(n);
  levels.push_back(c2);
  return levels;
}

void check_eval_images(const std::vector<Tensor>& images) {
  if (images.empty()) throw DataError("eval: no images supplied");
  for (const Tensor& img : images) {
    if (img.shape.n != 1 || img.shape.c != 3 || img.shape.h % 16 != 0 || img.shape.w % 16 != 0) {
      throw DataError("eval: image shape " + img.shape.str() +
                      " is not (1,3,H,W) with extents divisible by 16");
    }
  }
}

}  // namespace

std::string dataset_fingerprint(const std::vector<Tensor>& images) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor& img : images) {
    int dims[4] = {img.shape.n, img.shape.c, img.shape.h, img.shape.w};
    h = fnv1a64(dims, sizeof dims, h);
    h = fnv1a64(img.v.data(), img.v.size() * sizeof(double), h);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

EvalReport rd_sweep(Model& m, const std::vector<Tensor>& images, int interval) {
  check_eval_images(images);
  std::vector<int> levels = sweep_levels(m.cfg.c2, interval);

  EvalReport rep;
  rep.model_hash = m.content_hash();
  rep.dataset_id = dataset_fingerprint(images);
  rep.interval = interval;
  rep.images = int(images.size());
  rep.rows.resize(levels.size());
  for (size_t li = 0; li < levels.size(); ++li) rep.rows[li].n_channels = levels[li];

  for (const Tensor& img : images) {
    EncodeResult enc = encode_image(img, m);
    for (size_t li = 0; li < levels.size(); ++li) {
      BitstreamContainer cut = truncate(enc.container, TruncateTarget::by_channels(levels[li]));
      DecodeResult dec = decode_image(cut, m);
      rep.rows[li].bytes += double(cut.serialized_bytes());
      rep.rows[li].bpp += dec.stats.bpp;
      rep.rows[li].psnr += psnr(img, dec.image);
      rep.rows[li].ms_ssim += ms_ssim(img, dec.image);
    }
  }
  const double inv_n = 1.0 / double(images.size());
  for (EvalRow& row : rep.rows) {
    row.bytes *= inv_n;
    row.bpp *= inv_n;
    row.psnr *= inv_n;
    row.ms_ssim *= inv_n;
  }
  return rep;
}

void write_eval_csv(const EvalReport& r, std::ostream& out) {
  out << "# deepfgs-eval-v1\n";
  out << "n_channels,bytes,bpp,psnr,ms_ssim\n";
  for (const EvalRow& row : r.rows) {
    out << row.n_channels << ',' << fmt_double(row.bytes) << ',' << fmt_double(row.bpp) << ','
        << fmt_double(row.psnr) << ',' << fmt_double(row.ms_ssim) << '\n';
  }
}

std::string eval_report_json(const EvalReport& r) {
  std::ostringstream out;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", (unsigned long long)r.model_hash);
  out << "{\n  \"schema\": \"deepfgs-eval-v1\",\n";
  out << "  \"model_hash\": \"" << hash << "\",\n";
  out << "  \"dataset_id\": \"" << r.dataset_id << "\",\n";
  out << "  \"images\": " << r.images << ",\n";
  out << "  \"interval\": " << r.interval << ",\n";
  out << "  \"rows\": [\n";
  for (size_t i = 0; i < r.rows.size(); ++i) {
    const EvalRow& row = r.rows[i];
    out << "    {\"n_channels\": " << row.n_channels << ", \"bytes\": " << fmt_double(row.bytes)
        << ", \"bpp\": " << fmt_double(row.bpp) << ", \"psnr\": " << fmt_double(row.psnr)
        << ", \"ms_ssim\": " << fmt_double(row.ms_ssim) << "}";
    out << (i + 1 < r.rows.size() ? ",\n" : "\n");
  }
  out << "  ]\n}\n";
  return out.str();
}

EntropyReport analyze_entropy(Model& m, const std::vector<Tensor>& images, int groups) {
  check_eval_images(images);
  const int c2 = m.cfg.c2;
  if (groups <= 0 || c2 % groups != 0) {
    throw UsageError("analyze-entropy: groups=" + std::to_string(groups) +
                     " must divide C2=" + std::to_string(c2));
  }
  const int per = c2 / groups;

  EntropyReport rep;
  rep.model_hash = m.content_hash();
  rep.groups = groups;
  rep.images = int(images.size());
  rep.rows.resize(size_t(groups));
  for (int g = 0; g < groups; ++g) {
    rep.rows[size_t(g)].group = g + 1;
    rep.rows[size_t(g)].ch_lo = g * per;
    rep.rows[size_t(g)].ch_hi = (g + 1) * per - 1;
  }

  for (const Tensor& img : images) {
    EncodeResult enc = encode_image(img, m);
    if (int(enc.stats.est_bits_channel.size()) != c2) {
      throw NumericError("analyze-entropy: per-channel estimate has wrong length");
    }
    for (int g = 0; g < groups; ++g) {
      double bits = 0.0;
      for (int c = g * per; c < (g + 1) * per; ++c) {
        bits += enc.stats.est_bits_channel[size_t(c)];
      }
      rep.rows[size_t(g)].est_bits += bits;
      Tensor rec = reconstruct_from_latents(m, enc.latents.yhat_b, enc.latents.yhat_s,
                                            (g + 1) * per);
      rep.rows[size_t(g)].psnr += psnr(img, rec);
    }
    // the channel estimates, not est_bits_scalable: the grouped rows
    // partition the per-channel latent bits, excluding the hyper side stream
    for (double b : enc.stats.est_bits_channel) rep.total_scalable_bits += b;
  }
  const double inv_n = 1.0 / double(images.size());
  for (EntropyRow& row : rep.rows) {
    row.est_bits *= inv_n;
    row.psnr *= inv_n;
  }
  rep.total_scalable_bits *= inv_n;
  return rep;
}

void write_entropy_csv(const EntropyReport& r, std::ostream& out) {
  out << "# deepfgs-entropy-v1\n";
  out << "group,ch_lo,ch_hi,est_bits,psnr\n";
  for (const EntropyRow& row : r.rows) {
    out << row.group << ',' << row.ch_lo << ',' << row.ch_hi << ',' << fmt_double(row.est_bits)
        << ',' << fmt_double(row.psnr) << '\n';
  }
}

std::string entropy_report_json(const EntropyReport& r) {
  std::ostringstream out;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", (unsigned long long)r.model_hash);
  out << "{\n  \"schema\": \"deepfgs-entropy-v1\",\n";
  out << "  \"model_hash\": \"" << hash << "\",\n";
  out << "  \"images\": " << r.images << ",\n";
  out << "  \"groups\": " << r.groups << ",\n";
  out << "  \"total_scalable_bits\": " << fmt_double(r.total_scalable_bits) << ",\n";
  out << "  \"rows\": [\n";
  for (size_t i = 0; i < r.rows.size(); ++i) {
    const EntropyRow& row = r.rows[i];
    out << "    {\"group\": " << row.group << ", \"ch_lo\": " << row.ch_lo << ", \"ch_hi\": "
        << row.ch_hi << ", \"est_bits\": " << fmt_double(row.est_bits) << ", \"psnr\": "
        << fmt_double(row.psnr) << "}";
    out << (i + 1 < r.rows.size() ? ",\n" : "\n");
  }
  out << "  ]\n}\n";
  return out.str();
}

FeatureEnergy dump_features(Model& m, const Tensor& image, Tensor* basic_features,
                            Tensor* full_features) {
  LatentSet lat = infer_latents(image, m);

  Graph g;
  Model::Binder b(g, m);
  Tensor zeros(lat.yhat_s.shape);
  Val join0 = g.concat_c(g.constant(lat.yhat_b), g.constant(zeros));
  Val join1 = g.concat_c(g.constant(lat.yhat_b), g.constant(lat.yhat_s));
  Tensor f0 = g.val(m.ffm(b, join0));
  Tensor f1 = g.val(m.ffm(b, join1));

  const int channels = f0.shape.c;
  FeatureEnergy e;
  e.basic_only.resize(size_t(channels));
  e.full.resize(size_t(channels));
  e.difference.resize(size_t(channels));
  auto energy = [](const Tensor& t, int c) {
    double lo = t.at(0, c, 0, 0), hi = lo;
    for (int y = 0; y < t.shape.h; ++y) {
      for (int x = 0; x < t.shape.w; ++x) {
        double v = t.at(0, c, y, x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    return hi - lo;
  };
  Tensor diff(f0.shape);
  for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = f1.v[i] - f0.v[i];
  for (int c = 0; c < channels; ++c) {
    e.basic_only[size_t(c)] = energy(f0, c);
    e.full[size_t(c)] = energy(f1, c);
    e.difference[size_t(c)] = energy(diff, c);
  }
  if (basic_features) *basic_features = std::move(f0);
  if (full_features) *full_features = std::move(f1);
  return e;
}

void write_features_csv(const FeatureEnergy& e, std::ostream& out) {
  out << "# deepfgs-features-v1\n";
  out << "channel,basic_only,full,difference\n";
  for (size_t c = 0; c < e.basic_only.size(); ++c) {
    out << c << ',' << fmt_double(e.basic_only[c]) << ',' << fmt_double(e.full[c]) << ','
        << fmt_double(e.difference[c]) << '\n';
  }
}

}  // namespace dfgs
