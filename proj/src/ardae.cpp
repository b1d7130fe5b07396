#include "tweedie/ardae.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>

#include "tweedie/errors.hpp"
#include "tweedie/rng.hpp"

namespace tweedie {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'T', 'W', 'A', 'R', 'D', 'A', 'E', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::size_t reflect(long long i, std::size_t n) {
  const auto last = static_cast<long long>(n) - 1;
  if (i < 0) i = -i;
  if (i > last) i = 2 * last - i;
  return static_cast<std::size_t>(i);
}

void fill_patch(const Image& image, std::size_t pixel, int radius, double* out) {
  const auto row = static_cast<long long>(pixel / image.width());
  const auto col = static_cast<long long>(pixel % image.width());
  std::size_t k = 0;
  for (int dr = -radius; dr <= radius; ++dr) {
    const std::size_t r = reflect(row + dr, image.height());
    for (int dc = -radius; dc <= radius; ++dc) out[k++] = image(r, reflect(col + dc, image.width()));
  }
}

void require_patchable(const Image& image, int radius) {
  if (image.empty() || image.height() <= static_cast<std::size_t>(radius) ||
      image.width() <= static_cast<std::size_t>(radius)) {
    throw ValidationError("image of " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                          " is too small for patch radius " + std::to_string(radius));
  }
}

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void write_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == EOF) throw ValidationError("truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void write_params(std::ostream& out, const MlpParams& p) {
  for (double v : p.flatten()) write_u64(out, std::bit_cast<std::uint64_t>(v));
}

void read_params(std::istream& in, MlpParams& p) {
  std::vector<double> flat(p.parameter_count());
  for (double& v : flat) v = std::bit_cast<double>(read_u64(in));
  p.unflatten(flat);
}

}  // namespace

ArdaeConfig ArdaeConfig::defaults_for(NoiseKind kind) {
  ArdaeConfig c;
  if (kind == NoiseKind::Poisson) c.sigma_a_min = 0.02;
  return c;
}

std::vector<int> ArdaeConfig::widths() const {
  std::vector<int> w{patch_size()};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

void ArdaeConfig::validate() const {
  if (!(sigma_a_min > 0.0) || !(sigma_a_max >= sigma_a_min) || !std::isfinite(sigma_a_max)) {
    throw ValidationError("ardae: need 0 < sigma_a_min <= sigma_a_max");
  }
  if (schedule_len < 2) throw ValidationError("ardae: schedule_len must be >= 2");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ValidationError("ardae: ema_decay must lie in [0, 1)");
  if (epochs < 0 || steps_per_epoch < 0 || batch_size < 1) {
    throw ValidationError("ardae: epochs, steps_per_epoch must be >= 0 and batch_size >= 1");
  }
  if (!(learning_rate > 0.0) || !(final_learning_rate > 0.0)) {
    throw ValidationError("ardae: learning rates must be positive");
  }
  if (patch_radius < 0 || patch_radius > 16) throw ValidationError("ardae: patch_radius must be in [0, 16]");
  for (int h : hidden) {
    if (h < 1) throw ValidationError("ardae: hidden widths must be positive");
  }
}

json to_json(const ArdaeConfig& c) {
  return json{{"sigma_a_max", c.sigma_a_max},
              {"sigma_a_min", c.sigma_a_min},
              {"schedule_len", c.schedule_len},
              {"ema_decay", c.ema_decay},
              {"epochs", c.epochs},
              {"steps_per_epoch", c.steps_per_epoch},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"final_learning_rate", c.final_learning_rate},
              {"lr_decay_epoch", c.lr_decay_epoch},
              {"patch_radius", c.patch_radius},
              {"hidden", c.hidden},
              {"seed", c.seed}};
}

ArdaeConfig ardae_config_from_json(const json& j, ArdaeConfig c) {
  if (!j.is_object()) throw ValidationError("ardae config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "sigma_a_max") c.sigma_a_max = value.get<double>();
      else if (key == "sigma_a_min") c.sigma_a_min = value.get<double>();
      else if (key == "schedule_len") c.schedule_len = value.get<int>();
      else if (key == "ema_decay") c.ema_decay = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "steps_per_epoch") c.steps_per_epoch = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "final_learning_rate") c.final_learning_rate = value.get<double>();
      else if (key == "lr_decay_epoch") c.lr_decay_epoch = value.get<int>();
      else if (key == "patch_radius") c.patch_radius = value.get<int>();
      else if (key == "hidden") c.hidden = value.get<std::vector<int>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ValidationError("unknown ardae config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("ardae config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const ArdaeConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(config).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> geometric_schedule(double sigma_max, double sigma_min, int length) {
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min) || !std::isfinite(sigma_max)) {
    throw ValidationError("geometric schedule needs 0 < min <= max");
  }
  if (length < 2) throw ValidationError("geometric schedule needs at least two entries");
  std::vector<double> s(static_cast<std::size_t>(length));
  const double log_ratio = std::log(sigma_min / sigma_max) / (length - 1);
  for (int t = 0; t < length; ++t) s[t] = sigma_max * std::exp(log_ratio * t);
  s.front() = sigma_max;
  s.back() = sigma_min;
  return s;
}

Eigen::MatrixXd extract_patches(const Image& image, std::span<const std::size_t> pixels, int radius) {
  require_patchable(image, radius);
  const int side = 2 * radius + 1;
  Eigen::MatrixXd patches(side * side, static_cast<Eigen::Index>(pixels.size()));
  for (std::size_t j = 0; j < pixels.size(); ++j) {
    if (pixels[j] >= image.size()) throw ValidationError("pixel index out of range");
    fill_patch(image, pixels[j], radius, patches.col(static_cast<Eigen::Index>(j)).data());
  }
  return patches;
}

double ardae_residual_loss(const MlpParams& params, const Eigen::MatrixXd& patches, const Eigen::MatrixXd& u,
                           double sigma_a, MlpParams* grad) {
  if (!(sigma_a > 0.0)) throw DomainError("sigma_a must be positive");
  if (patches.cols() == 0) throw ValidationError("empty batch");
  if (u.rows() != patches.rows() || u.cols() != patches.cols()) throw ValidationError("u must match the batch");
  const Eigen::Index centre = patches.rows() / 2;
  const auto n = static_cast<double>(patches.cols());

  MlpTape tape;
  const Eigen::MatrixXd out = mlp_forward(params, patches + sigma_a * u, grad ? &tape : nullptr);
  const Eigen::RowVectorXd residual = u.row(centre) + sigma_a * out.row(0);
  const double loss = residual.squaredNorm() / n;
  if (grad) *grad = mlp_backward(params, tape, (2.0 * sigma_a / n) * residual);
  return loss;
}

LossAndGrad ardae_loss_and_grad(const MlpParams& params, const Eigen::MatrixXd& patches, double sigma_a,
                                std::uint64_t seed) {
  RandomStream rng(seed, StreamPurpose::TrainingNoise);
  Eigen::MatrixXd u(patches.rows(), patches.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, j) = standard_normal(rng);
  }
  LossAndGrad out{0.0, {}};
  out.loss = ardae_residual_loss(params, patches, u, sigma_a, &out.grad);
  if (!std::isfinite(out.loss)) {
    throw TrainingDivergence("non-finite AR-DAE loss", ArdaeModel{{}, params, params}, 0);
  }
  return out;
}

ArdaeModel init_ardae(const ArdaeConfig& config) {
  config.validate();
  ArdaeModel m;
  m.config = config;
  m.params = init_mlp(config.widths(), config.seed);
  m.ema = m.params;
  return m;
}

TrainingResult train_ardae(const ArdaeConfig& config, std::span<const Image> data) {
  return train_ardae(init_ardae(config), data);
}

TrainingResult train_ardae(ArdaeModel model, std::span<const Image> data) {
  const ArdaeConfig& cfg = model.config;
  cfg.validate();
  if (data.empty()) throw ValidationError("training set is empty");
  std::vector<std::size_t> offsets{0};
  for (const auto& img : data) {
    require_patchable(img, cfg.patch_radius);
    require_finite(img, "training image");
    offsets.push_back(offsets.back() + img.size());
  }
  const std::size_t total = offsets.back();
  const std::size_t steps_per_epoch =
      cfg.steps_per_epoch > 0 ? static_cast<std::size_t>(cfg.steps_per_epoch)
                              : std::max<std::size_t>(1, (total + cfg.batch_size - 1) / cfg.batch_size);
  const auto schedule = geometric_schedule(cfg.sigma_a_max, cfg.sigma_a_min, cfg.schedule_len);

  TrainingResult result;
  const std::size_t n_params = model.params.parameter_count();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
  Eigen::VectorXd m2 = m1;
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double adam_eps = 1e-8;

  const int side = 2 * cfg.patch_radius + 1;
  Eigen::MatrixXd patches(side * side, cfg.batch_size);
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch < cfg.decay_epoch() ? cfg.learning_rate : cfg.final_learning_rate;
    double epoch_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      RandomStream pick(cfg.seed, StreamPurpose::TrainingSchedule, step);
      const double sigma_a = schedule[pick.below(schedule.size())];
      for (int j = 0; j < cfg.batch_size; ++j) {
        const std::size_t flat = pick.below(total);
        const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
        const auto img = static_cast<std::size_t>(it - offsets.begin());
        fill_patch(data[img], flat - *it, cfg.patch_radius, patches.col(j).data());
      }

      const std::uint64_t noise_seed = mix64(cfg.seed ^ mix64(step));
      LossAndGrad lg;
      try {
        lg = ardae_loss_and_grad(model.params, patches, sigma_a, noise_seed);
      } catch (const TrainingDivergence&) {
        throw TrainingDivergence("non-finite AR-DAE loss at step " + std::to_string(step), model, step);
      }

      const Eigen::VectorXd g = as_vector(lg.grad.flatten());
      m1 = beta1 * m1 + (1.0 - beta1) * g;
      m2 = beta2 * m2 + (1.0 - beta2) * g.cwiseAbs2();
      const double t = static_cast<double>(step + 1);
      const double c1 = 1.0 - std::pow(beta1, t);
      const double c2 = 1.0 - std::pow(beta2, t);
      const Eigen::VectorXd update =
          (lr / c1) * m1.array() / ((m2.array() / c2).sqrt() + adam_eps);

      MlpParams next = model.params;
      next.unflatten(as_std(as_vector(next.flatten()) - update));
      if (!next.all_finite()) {
        throw TrainingDivergence("non-finite weights at step " + std::to_string(step), model, step);
      }
      model.params = std::move(next);
      model.ema.blend_toward(model.params, cfg.ema_decay);
      epoch_sum += lg.loss;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(steps_per_epoch));
  }
  result.steps = step;
  result.model = std::move(model);
  return result;
}

ScoreField eval_score(const MlpParams& params, int patch_radius, const Image& y) {
  require_patchable(y, patch_radius);
  const int side = 2 * patch_radius + 1;
  if (params.weights.empty() || params.weights.front().cols() != side * side) {
    throw ValidationError("network input does not match patch radius " + std::to_string(patch_radius));
  }
  ScoreField field{Image(y.height(), y.width()), "ardae"};
  constexpr std::size_t kChunk = 4096;
  Eigen::MatrixXd patches;
  for (std::size_t start = 0; start < y.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, y.size() - start);
    patches.resize(side * side, static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) fill_patch(y, start + j, patch_radius, patches.col(j).data());
    const Eigen::MatrixXd out = mlp_forward(params, patches);
    for (std::size_t j = 0; j < n; ++j) field.values[start + j] = out(0, static_cast<Eigen::Index>(j));
  }
  return field;
}

void save_checkpoint(const std::filesystem::path& path, const ArdaeModel& model) {
  const json header{{"format", "tweedie-ardae"},
                    {"widths", model.params.widths()},
                    {"patch_radius", model.config.patch_radius},
                    {"activation", "silu"},
                    {"config", to_json(model.config)},
                    {"config_hash", config_hash(model.config)},
                    {"ema", true},
                    {"payload", "f64le online then ema"}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((kCheckpointVersion >> (8 * i)) & 0xFF));
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_params(out, model.params);
  write_params(out, model.ema);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ArdaeModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError(path.string() + " is not an AR-DAE checkpoint");
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(static_cast<unsigned char>(in.get())) << (8 * i);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t len = read_u64(in);
  if (len > (1u << 24)) throw ValidationError("checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ValidationError("truncated checkpoint header");

  ArdaeModel model;
  try {
    const json header = json::parse(text);
    model.config = ardae_config_from_json(header.at("config"));
    if (header.at("config_hash").get<std::string>() != config_hash(model.config)) {
      throw ValidationError("checkpoint config hash mismatch");
    }
    if (header.at("widths").get<std::vector<int>>() != model.config.widths()) {
      throw ValidationError("checkpoint layer widths disagree with its config");
    }
    if (header.at("activation").get<std::string>() != "silu" || !header.at("ema").get<bool>()) {
      throw ValidationError("unsupported checkpoint layout");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }
  model.params = zeros_like(init_mlp(model.config.widths(), 0));
  model.ema = model.params;
  read_params(in, model.params);
  read_params(in, model.ema);
  if (in.peek() != EOF) throw ValidationError("trailing bytes in checkpoint");
  return model;
}

ArdaeScore::ArdaeScore(ArdaeModel model) : model_(std::move(model)) {
  model_.config.validate();
  if (!model_.ema.same_shape(model_.params) || model_.ema.widths() != model_.config.widths()) {
    throw ValidationError("AR-DAE weights do not match their config");
  }
  name_ = "ardae:" + config_hash(model_.config);
}

ScoreField ArdaeScore::evaluate(const Image& y) const {
  ScoreField f = eval_score(model_.ema, model_.config.patch_radius, y);
  f.backend = name_;
  return f;
}

}  // namespace tweedie
