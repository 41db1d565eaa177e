#pragma once

#include "donald/ingest.hpp"
#include "donald/spectral.hpp"
#include "donald/tensor_field.hpp"

namespace donald {

struct AnalysisParams {
  Normalization normalization = Normalization::Row;
  double sigma_grad_x = kDefaultSigmaGrad;
  double sigma_grad_y = kDefaultSigmaGrad;
  double sigma_tensor = kDefaultSigmaTensor;
};

struct Analysis {
  TokenLayerMatrix matrix;  // post-normalization
  DerivativeFields derivatives;  // smoothed
  StructureTensorField tensors;
  FlowField flow;
  UtilizationReport utilization;
};

/// Runs gradients, tensors, eigen-analysis and utilization on a prepared
/// matrix. The matrix is used as given; normalization is not re-applied.
inline Analysis analyze_matrix(TokenLayerMatrix matrix, const AnalysisParams& params) {
  Analysis a;
  a.derivatives = smooth_derivatives(central_gradients(matrix), params.sigma_grad_x, params.sigma_grad_y);
  a.tensors = assemble_structure_tensors(a.derivatives, params.sigma_tensor);
  a.flow = flow_field(a.tensors);
  a.utilization = utilization_rates(a.tensors);
  a.matrix = std::move(matrix);
  return a;
}

inline Analysis analyze(const EmbeddingSpace& space, const AnalysisParams& params) {
  return analyze_matrix(normalize(collapse_hidden_units(space), params.normalization), params);
}

}  // namespace donald
