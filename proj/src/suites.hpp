#pragma once

#include <vector>

#include "dyad/harness.hpp"

namespace dyad::suites {

// throws UnknownKernel for names without a tensor form
void check_tensor_kernel(const std::string& name);

std::vector<Row> identity(const ExperimentConfig& c);
std::vector<Row> representation(const ExperimentConfig& c);
std::vector<Row> weighted(const ExperimentConfig& c);
std::vector<Row> commutator(const ExperimentConfig& c);
std::vector<Row> lower_bound(const ExperimentConfig& c);
std::vector<Row> mixed_norm(const ExperimentConfig& c);

}  // namespace dyad::suites
