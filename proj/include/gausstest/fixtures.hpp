#pragma once

#include <optional>
#include <string>

#include "gausstest/symplectic.hpp"

namespace gausstest {

// A state built from a short spec string:
//   vacuum | fock:m[,m2,...] | thermal:nbar | squeezed:r | coherent:re[,im]
struct Fixture {
    std::string spec;
    FockState state;
    std::optional<GaussianState> gaussian;  // set for Gaussian fixtures
};

// Without an explicit cutoff, Gaussian fixtures use the smallest cutoff with
// leakage below 1e-12 and Fock fixtures use max occupation + 4.
Fixture make_fixture(const std::string& spec, std::optional<int> cutoff = std::nullopt,
                     double leakage_bound = kDefaultLeakageBound);

bool is_named_fixture(const std::string& spec);

}  // namespace gausstest
