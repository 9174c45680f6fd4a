#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "anomaly/timeseries.hpp"

namespace anomaly {

struct AutoencoderConfig {
  Eigen::Index input_dim = 1;
  Eigen::Index hidden_size = 32;
  Eigen::Index window_length = 48;
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t rng_seed = 1;
  double clip_norm = 5.0;  // global gradient-norm clip, <= 0 disables
};

// Gated recurrent unit parameters. Weight rows index hidden units; W* act on
// the input, U* on the previous hidden state.
struct GruCellParams {
  Eigen::MatrixXd w_update, u_update;
  Eigen::VectorXd b_update;
  Eigen::MatrixXd w_reset, u_reset;
  Eigen::VectorXd b_reset;
  Eigen::MatrixXd w_cand, u_cand;
  Eigen::VectorXd b_cand;

  Eigen::Index hidden_size() const { return w_update.rows(); }
  Eigen::Index input_size() const { return w_update.cols(); }
};

// Sequence autoencoder: a GRU encoder compresses a window into its final
// hidden state; a GRU decoder seeded with that state re-emits the window in
// reverse order, feeding each projected output back as its next input.
struct AutoencoderModel {
  GruCellParams encoder;
  GruCellParams decoder;
  Eigen::MatrixXd output_w;  // input_dim x hidden_size
  Eigen::VectorXd output_b;  // input_dim
  AutoencoderConfig config;
};

struct ErrorSeries {
  std::vector<std::int64_t> timestamps;
  std::vector<double> errors;
};

struct TrainResult {
  AutoencoderModel model;
  std::vector<double> epoch_losses;  // mean window loss per epoch
};

// One GRU step:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wh x + Uh (r .* h) + bh)
//   h' = (1 - z) .* h + z .* c
Eigen::VectorXd gru_cell_forward(const Eigen::VectorXd& input, const Eigen::VectorXd& h_prev,
                                 const GruCellParams& params);

// Runs the encoder over the window rows from a zero state; returns the final
// hidden state.
Eigen::VectorXd encode(const Eigen::MatrixXd& window, const GruCellParams& encoder);

// Runs the decoder for `steps` steps from `latent`, starting from a zero
// input and feeding each emitted output back in. Output row (steps-1-k)
// holds emission k, so the result aligns with the input window.
Eigen::MatrixXd decode(const Eigen::VectorXd& latent, Eigen::Index steps,
                       const GruCellParams& decoder, const Eigen::MatrixXd& output_w,
                       const Eigen::VectorXd& output_b);

Eigen::MatrixXd reconstruct(const AutoencoderModel& model, const Eigen::MatrixXd& window);

// Mean squared error over all window cells.
double window_loss(const AutoencoderModel& model, const Eigen::MatrixXd& window);

// Draws every parameter uniformly from [-1/sqrt(H), 1/sqrt(H)] in a fixed
// order, so a seed reproduces the model bit for bit.
AutoencoderModel init_model(const AutoencoderConfig& config);

// Mini-batch Adam over the windows with global-norm gradient clipping.
// Throws if an epoch loss turns non-finite.
TrainResult train(const WindowedDataset& dataset, const AutoencoderConfig& config);

// Reconstruction error per timestamp: for each full window ending at t, the
// root-mean-square residual of the window's last row. Defined for
// t >= window_length - 1; expects a normalized series.
ErrorSeries reconstruction_errors(const AutoencoderModel& model, const TimeSeries& series);

// Maximum relative deviation between analytic gradients and central finite
// differences of the window loss, over every parameter.
double gradient_check(const AutoencoderModel& model, const Eigen::MatrixXd& window,
                      double eps);

// Canonical flat parameter vector (encoder, decoder, projection; matrices
// row-major). Shared by the optimizer, the checkpoint format and
// gradient_check.
Eigen::Index parameter_count(const AutoencoderModel& model);
Eigen::VectorXd pack_parameters(const AutoencoderModel& model);
void unpack_parameters(const Eigen::VectorXd& flat, AutoencoderModel& model);

// Analytic gradient of window_loss in the canonical packed layout.
Eigen::VectorXd loss_gradients(const AutoencoderModel& model, const Eigen::MatrixXd& window,
                               double* loss = nullptr);

}  // namespace anomaly
