#pragma once

#include <string>
#include <string_view>

#include "drift/model.hpp"

namespace drift {

/// Reads a model file:
///
///   epsilon = 0.001
///   [rotor]
///   dim = 1
///   coefficients = [[0.5, 2]]          # coef, exponent of I_1, ..., I_d
///   [[pendulum]]
///   fourier_coeffs = [[1, 1.0, 0.0], [0, -1.0, 0.0]]   # k, cos amp, sin amp
///   sign = 1
///   branch = 1                          # optional
///   [[perturbation.mode]]
///   k = [1]
///   l = [0]
///   m = 1
///   amplitude = 0.5
///   phase = 0.0                         # optional
///
/// Errors carry "source:line:column".
SystemSpec load_model(const std::string& path);
SystemSpec parse_model(std::string_view text, std::string_view source = "<model>");

/// Inverse of parse_model; numbers are written with 17 significant digits.
std::string format_model(const SystemSpec& spec);
void save_model(const std::string& path, const SystemSpec& spec);

}  // namespace drift
