#include "anomaly/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "anomaly/rng.hpp"

namespace anomaly {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gradient accumulator mirroring the model's parameter blocks.
struct ModelGrads {
  GruCellParams encoder;
  GruCellParams decoder;
  Eigen::MatrixXd output_w;
  Eigen::VectorXd output_b;
};

// Canonical block order shared by init, pack/unpack and checkpointing.
template <typename Cell, typename F>
void visit_cell_blocks(Cell& cell, F&& f) {
  f(cell.w_update);
  f(cell.u_update);
  f(cell.b_update);
  f(cell.w_reset);
  f(cell.u_reset);
  f(cell.b_reset);
  f(cell.w_cand);
  f(cell.u_cand);
  f(cell.b_cand);
}

template <typename Model, typename F>
void visit_model_blocks(Model& model, F&& f) {
  visit_cell_blocks(model.encoder, f);
  visit_cell_blocks(model.decoder, f);
  f(model.output_w);
  f(model.output_b);
}

template <typename Model>
Eigen::Index count_blocks(const Model& model) {
  Eigen::Index n = 0;
  visit_model_blocks(model, [&](const auto& block) { n += block.size(); });
  return n;
}

template <typename Model>
Eigen::VectorXd pack_blocks(const Model& model) {
  Eigen::VectorXd flat(count_blocks(model));
  Eigen::Index k = 0;
  visit_model_blocks(model, [&](const auto& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) {
        flat[k++] = block(r, c);
      }
    }
  });
  return flat;
}

template <typename Model>
void unpack_blocks(const Eigen::VectorXd& flat, Model& model) {
  Eigen::Index k = 0;
  visit_model_blocks(model, [&](auto& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) {
        block(r, c) = flat[k++];
      }
    }
  });
}

void check_cell(const GruCellParams& p, const char* name) {
  Eigen::Index h = p.w_update.rows();
  Eigen::Index d = p.w_update.cols();
  auto bad = [&](const char* what) {
    throw std::invalid_argument(std::string(name) + ": inconsistent " + what + " shape");
  };
  if (p.w_reset.rows() != h || p.w_reset.cols() != d || p.w_cand.rows() != h ||
      p.w_cand.cols() != d) {
    bad("input weight");
  }
  if (p.u_update.rows() != h || p.u_update.cols() != h || p.u_reset.rows() != h ||
      p.u_reset.cols() != h || p.u_cand.rows() != h || p.u_cand.cols() != h) {
    bad("recurrent weight");
  }
  if (p.b_update.size() != h || p.b_reset.size() != h || p.b_cand.size() != h) {
    bad("bias");
  }
}

void check_model(const AutoencoderModel& m) {
  check_cell(m.encoder, "encoder");
  check_cell(m.decoder, "decoder");
  Eigen::Index h = m.encoder.hidden_size();
  Eigen::Index d = m.encoder.input_size();
  if (m.decoder.hidden_size() != h || m.decoder.input_size() != d) {
    throw std::invalid_argument("decoder shape does not match encoder");
  }
  if (m.output_w.rows() != d || m.output_w.cols() != h || m.output_b.size() != d) {
    throw std::invalid_argument("projection shape does not match hidden/input sizes");
  }
}

void check_config(const AutoencoderConfig& c) {
  if (c.input_dim < 1) throw std::invalid_argument("config: input_dim must be >= 1");
  if (c.hidden_size < 1) throw std::invalid_argument("config: hidden_size must be >= 1");
  if (c.window_length < 1) throw std::invalid_argument("config: window_length must be >= 1");
  if (!(c.learning_rate > 0)) throw std::invalid_argument("config: learning_rate must be > 0");
  if (c.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (c.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
}

struct StepCache {
  Eigen::VectorXd input, h_prev, z, r, cand;
};

Eigen::VectorXd step_forward(const GruCellParams& p, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& h_prev, StepCache* cache) {
  Eigen::ArrayXd az = (p.w_update * x + p.u_update * h_prev + p.b_update).array();
  Eigen::ArrayXd ar = (p.w_reset * x + p.u_reset * h_prev + p.b_reset).array();
  Eigen::VectorXd z = az.unaryExpr([](double v) { return sigmoid(v); }).matrix();
  Eigen::VectorXd r = ar.unaryExpr([](double v) { return sigmoid(v); }).matrix();
  Eigen::VectorXd c =
      (p.w_cand * x + p.u_cand * r.cwiseProduct(h_prev) + p.b_cand).array().tanh().matrix();
  Eigen::VectorXd h =
      ((1.0 - z.array()) * h_prev.array() + z.array() * c.array()).matrix();
  if (cache) {
    cache->input = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->cand = std::move(c);
  }
  return h;
}

// Backpropagates dh (gradient w.r.t. the step's output) through one GRU step.
// Accumulates parameter gradients, optionally emits the input gradient, and
// returns the gradient w.r.t. the previous hidden state.
Eigen::VectorXd step_backward(const GruCellParams& p, const StepCache& s,
                              const Eigen::VectorXd& dh_new, GruCellParams& g,
                              Eigen::VectorXd* dx) {
  Eigen::ArrayXd z = s.z.array();
  Eigen::ArrayXd r = s.r.array();
  Eigen::ArrayXd c = s.cand.array();
  Eigen::ArrayXd hp = s.h_prev.array();
  Eigen::ArrayXd dh = dh_new.array();

  Eigen::ArrayXd dz = dh * (c - hp);
  Eigen::ArrayXd dc = dh * z;
  Eigen::ArrayXd dh_prev = dh * (1.0 - z);

  Eigen::VectorXd dac = (dc * (1.0 - c * c)).matrix();
  Eigen::VectorXd drh = p.u_cand.transpose() * dac;
  Eigen::ArrayXd dr = drh.array() * hp;
  dh_prev += drh.array() * r;

  Eigen::VectorXd daz = (dz * z * (1.0 - z)).matrix();
  Eigen::VectorXd dar = (dr * r * (1.0 - r)).matrix();

  g.w_update.noalias() += daz * s.input.transpose();
  g.u_update.noalias() += daz * s.h_prev.transpose();
  g.b_update += daz;
  g.w_reset.noalias() += dar * s.input.transpose();
  g.u_reset.noalias() += dar * s.h_prev.transpose();
  g.b_reset += dar;
  g.w_cand.noalias() += dac * s.input.transpose();
  g.u_cand.noalias() += dac * s.r.cwiseProduct(s.h_prev).transpose();
  g.b_cand += dac;

  if (dx) {
    *dx = p.w_update.transpose() * daz + p.w_reset.transpose() * dar +
          p.w_cand.transpose() * dac;
  }
  return dh_prev.matrix() + p.u_update.transpose() * daz + p.u_reset.transpose() * dar;
}

// Forward plus full backpropagation through time for one window; accumulates
// parameter gradients of the mean-squared reconstruction loss.
double window_backward(const AutoencoderModel& m, const Eigen::MatrixXd& window,
                       ModelGrads& g) {
  const Eigen::Index L = window.rows();
  const Eigen::Index D = window.cols();
  const Eigen::Index H = m.encoder.hidden_size();

  std::vector<StepCache> enc_steps(static_cast<std::size_t>(L));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
  for (Eigen::Index t = 0; t < L; ++t) {
    h = step_forward(m.encoder, window.row(t).transpose(), h,
                     &enc_steps[static_cast<std::size_t>(t)]);
  }

  std::vector<StepCache> dec_steps(static_cast<std::size_t>(L));
  std::vector<Eigen::VectorXd> dec_hidden(static_cast<std::size_t>(L));
  Eigen::MatrixXd recon(L, D);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(D);
  for (Eigen::Index k = 0; k < L; ++k) {
    h = step_forward(m.decoder, u, h, &dec_steps[static_cast<std::size_t>(k)]);
    dec_hidden[static_cast<std::size_t>(k)] = h;
    Eigen::VectorXd y = m.output_w * h + m.output_b;
    recon.row(L - 1 - k) = y.transpose();
    u = std::move(y);
  }

  Eigen::MatrixXd diff = recon - window;
  const double scale = 1.0 / static_cast<double>(L * D);
  double loss = diff.squaredNorm() * scale;
  Eigen::MatrixXd d_recon = diff * (2.0 * scale);

  // Decoder backward. Emission k feeds step k+1 as input, so its gradient
  // collects both the reconstruction term and the next step's input term.
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd du_next;
  for (Eigen::Index k = L - 1; k >= 0; --k) {
    Eigen::VectorXd dy = d_recon.row(L - 1 - k).transpose();
    if (k < L - 1) dy += du_next;
    g.output_w.noalias() += dy * dec_hidden[static_cast<std::size_t>(k)].transpose();
    g.output_b += dy;
    Eigen::VectorXd dh = dh_next + m.output_w.transpose() * dy;
    Eigen::VectorXd dxk;
    dh_next =
        step_backward(m.decoder, dec_steps[static_cast<std::size_t>(k)], dh, g.decoder, &dxk);
    du_next = std::move(dxk);
  }

  // dh_next is now the gradient w.r.t. the latent state.
  Eigen::VectorXd dh = std::move(dh_next);
  for (Eigen::Index t = L - 1; t >= 0; --t) {
    dh = step_backward(m.encoder, enc_steps[static_cast<std::size_t>(t)], dh, g.encoder,
                       nullptr);
  }
  return loss;
}

ModelGrads make_grads(const AutoencoderModel& m) {
  ModelGrads g{m.encoder, m.decoder, m.output_w, m.output_b};
  visit_model_blocks(g, [](auto& block) { block.setZero(); });
  return g;
}

AutoencoderModel init_model_with(const AutoencoderConfig& config, std::mt19937_64& rng) {
  check_config(config);
  const Eigen::Index d = config.input_dim;
  const Eigen::Index h = config.hidden_size;

  AutoencoderModel m;
  m.config = config;
  auto shape_cell = [&](GruCellParams& cell) {
    cell.w_update.resize(h, d);
    cell.u_update.resize(h, h);
    cell.b_update.resize(h);
    cell.w_reset.resize(h, d);
    cell.u_reset.resize(h, h);
    cell.b_reset.resize(h);
    cell.w_cand.resize(h, d);
    cell.u_cand.resize(h, h);
    cell.b_cand.resize(h);
  };
  shape_cell(m.encoder);
  shape_cell(m.decoder);
  m.output_w.resize(d, h);
  m.output_b.resize(d);

  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  visit_model_blocks(m, [&](auto& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) {
        block(r, c) = uniform_range(rng, -bound, bound);
      }
    }
  });
  return m;
}

}  // namespace

Eigen::VectorXd gru_cell_forward(const Eigen::VectorXd& input, const Eigen::VectorXd& h_prev,
                                 const GruCellParams& params) {
  check_cell(params, "gru_cell_forward");
  if (input.size() != params.input_size()) {
    throw std::invalid_argument("gru_cell_forward: input has " + std::to_string(input.size()) +
                                " entries, cell expects " +
                                std::to_string(params.input_size()));
  }
  if (h_prev.size() != params.hidden_size()) {
    throw std::invalid_argument("gru_cell_forward: state has " + std::to_string(h_prev.size()) +
                                " entries, cell expects " +
                                std::to_string(params.hidden_size()));
  }
  return step_forward(params, input, h_prev, nullptr);
}

Eigen::VectorXd encode(const Eigen::MatrixXd& window, const GruCellParams& encoder) {
  check_cell(encoder, "encode");
  if (window.rows() == 0) {
    throw std::invalid_argument("encode: empty window");
  }
  if (window.cols() != encoder.input_size()) {
    throw std::invalid_argument("encode: window has " + std::to_string(window.cols()) +
                                " dimensions, encoder expects " +
                                std::to_string(encoder.input_size()));
  }
  Eigen::VectorXd h = Eigen::VectorXd::Zero(encoder.hidden_size());
  for (Eigen::Index t = 0; t < window.rows(); ++t) {
    h = step_forward(encoder, window.row(t).transpose(), h, nullptr);
  }
  return h;
}

Eigen::MatrixXd decode(const Eigen::VectorXd& latent, Eigen::Index steps,
                       const GruCellParams& decoder, const Eigen::MatrixXd& output_w,
                       const Eigen::VectorXd& output_b) {
  check_cell(decoder, "decode");
  if (steps < 1) {
    throw std::invalid_argument("decode: steps must be >= 1");
  }
  if (latent.size() != decoder.hidden_size()) {
    throw std::invalid_argument("decode: latent has " + std::to_string(latent.size()) +
                                " entries, decoder expects " +
                                std::to_string(decoder.hidden_size()));
  }
  const Eigen::Index d = decoder.input_size();
  if (output_w.rows() != d || output_w.cols() != decoder.hidden_size() ||
      output_b.size() != d) {
    throw std::invalid_argument("decode: projection shape mismatch");
  }
  Eigen::MatrixXd out(steps, d);
  Eigen::VectorXd h = latent;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  for (Eigen::Index k = 0; k < steps; ++k) {
    h = step_forward(decoder, u, h, nullptr);
    Eigen::VectorXd y = output_w * h + output_b;
    out.row(steps - 1 - k) = y.transpose();
    u = std::move(y);
  }
  return out;
}

Eigen::MatrixXd reconstruct(const AutoencoderModel& model, const Eigen::MatrixXd& window) {
  check_model(model);
  if (window.rows() == 0) {
    throw std::invalid_argument("reconstruct: empty window");
  }
  if (window.cols() != model.encoder.input_size()) {
    throw std::invalid_argument("reconstruct: window has " + std::to_string(window.cols()) +
                                " dimensions, model expects " +
                                std::to_string(model.encoder.input_size()));
  }
  Eigen::VectorXd latent = encode(window, model.encoder);
  return decode(latent, window.rows(), model.decoder, model.output_w, model.output_b);
}

double window_loss(const AutoencoderModel& model, const Eigen::MatrixXd& window) {
  Eigen::MatrixXd recon = reconstruct(model, window);
  return (recon - window).squaredNorm() /
         static_cast<double>(window.rows() * window.cols());
}

AutoencoderModel init_model(const AutoencoderConfig& config) {
  std::mt19937_64 rng(config.rng_seed);
  return init_model_with(config, rng);
}

TrainResult train(const WindowedDataset& dataset, const AutoencoderConfig& config) {
  check_config(config);
  if (dataset.windows.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  if (dataset.window_length != config.window_length) {
    throw std::invalid_argument("train: dataset windows of length " +
                                std::to_string(dataset.window_length) +
                                " do not match configured " +
                                std::to_string(config.window_length));
  }
  for (const auto& w : dataset.windows) {
    if (w.rows() != config.window_length || w.cols() != config.input_dim) {
      throw std::invalid_argument("train: window shape does not match config");
    }
  }

  std::mt19937_64 rng(config.rng_seed);
  TrainResult result{init_model_with(config, rng), {}};
  AutoencoderModel& model = result.model;

  const std::size_t n = dataset.windows.size();
  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  Eigen::VectorXd theta = pack_parameters(model);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(theta.size());
  long adam_step = 0;
  ModelGrads grads = make_grads(model);

  result.epoch_losses.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      visit_model_blocks(grads, [](auto& block) { block.setZero(); });
      double batch_loss = 0.0;
      for (std::size_t i = start; i < start + count; ++i) {
        batch_loss += window_backward(model, dataset.windows[order[i]], grads);
      }
      loss_sum += batch_loss;

      Eigen::VectorXd grad = pack_blocks(grads) / static_cast<double>(count);
      if (config.clip_norm > 0) {
        double norm = grad.norm();
        if (norm > config.clip_norm) grad *= config.clip_norm / norm;
      }
      ++adam_step;
      adam_m = kAdamBeta1 * adam_m + (1.0 - kAdamBeta1) * grad;
      adam_v = kAdamBeta2 * adam_v.array() + (1.0 - kAdamBeta2) * grad.array().square();
      const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_step));
      const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_step));
      theta.array() -= config.learning_rate * (adam_m.array() / bc1) /
                       ((adam_v.array() / bc2).sqrt() + kAdamEps);
      unpack_parameters(theta, model);
    }
    double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1));
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

ErrorSeries reconstruction_errors(const AutoencoderModel& model, const TimeSeries& series) {
  check_model(model);
  const Eigen::Index L = model.config.window_length;
  const Eigen::Index D = model.encoder.input_size();
  if (series.dims() != D) {
    throw std::invalid_argument("reconstruction_errors: series has " +
                                std::to_string(series.dims()) + " dimensions, model expects " +
                                std::to_string(D));
  }
  if (series.size() < L) {
    throw std::invalid_argument("reconstruction_errors: series of length " +
                                std::to_string(series.size()) +
                                " is shorter than window of " + std::to_string(L));
  }
  ErrorSeries out;
  const std::size_t count = static_cast<std::size_t>(series.size() - L + 1);
  out.timestamps.reserve(count);
  out.errors.reserve(count);
  for (Eigen::Index t = L - 1; t < series.size(); ++t) {
    Eigen::MatrixXd window = series.values.middleRows(t - L + 1, L);
    Eigen::MatrixXd recon = reconstruct(model, window);
    double err = std::sqrt((recon.row(L - 1) - window.row(L - 1)).squaredNorm() /
                           static_cast<double>(D));
    out.timestamps.push_back(series.timestamps[static_cast<std::size_t>(t)]);
    out.errors.push_back(err);
  }
  return out;
}

double gradient_check(const AutoencoderModel& model, const Eigen::MatrixXd& window,
                      double eps) {
  if (!(eps > 0.0) || eps > 1e-2) {
    throw std::invalid_argument("gradient_check: eps must be in (0, 1e-2]");
  }
  Eigen::VectorXd analytic = loss_gradients(model, window);
  Eigen::VectorXd theta = pack_parameters(model);
  AutoencoderModel probe = model;

  double max_dev = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + eps;
    unpack_parameters(theta, probe);
    const double up = window_loss(probe, window);
    theta[i] = orig - eps;
    unpack_parameters(theta, probe);
    const double down = window_loss(probe, window);
    theta[i] = orig;

    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max(1e-6, std::abs(analytic[i]) + std::abs(numeric));
    max_dev = std::max(max_dev, std::abs(analytic[i] - numeric) / denom);
  }
  return max_dev;
}

Eigen::Index parameter_count(const AutoencoderModel& model) { return count_blocks(model); }

Eigen::VectorXd pack_parameters(const AutoencoderModel& model) { return pack_blocks(model); }

void unpack_parameters(const Eigen::VectorXd& flat, AutoencoderModel& model) {
  if (flat.size() != count_blocks(model)) {
    throw std::invalid_argument("unpack_parameters: vector of size " +
                                std::to_string(flat.size()) + " for model with " +
                                std::to_string(count_blocks(model)) + " parameters");
  }
  unpack_blocks(flat, model);
}

Eigen::VectorXd loss_gradients(const AutoencoderModel& model, const Eigen::MatrixXd& window,
                               double* loss) {
  check_model(model);
  if (window.rows() == 0 || window.cols() != model.encoder.input_size()) {
    throw std::invalid_argument("loss_gradients: window shape mismatch");
  }
  ModelGrads grads = make_grads(model);
  double l = window_backward(model, window, grads);
  if (loss) *loss = l;
  return pack_blocks(grads);
}

}  // namespace anomaly
