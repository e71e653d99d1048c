#pragma once

// Finite-difference gradient checks over every primitive and the two networks
// at small sizes, shared by the CLI and the test suites.

#include <string>
#include <vector>

#include "inrgan/grad_check.hpp"

namespace inrgan {

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

// One graph per primitive. Each output is contracted with fixed random weights
// before summation so linear primitives are not checked against all-ones seeds.
std::vector<NamedGradCheck> primitive_grad_checks(const GradCheckOptions& opts = {});
// Generator end-to-end (source -> hypernetwork -> local MLPs -> image) and the
// discriminator, with respect to parameters and inputs.
std::vector<NamedGradCheck> network_grad_checks(const GradCheckOptions& opts = {});

}  // namespace inrgan
