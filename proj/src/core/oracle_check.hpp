#pragma once

namespace uqxai {

// Release-gate verification: exact-Shapley oracle vs the tree and kernel
// paths on random small forests, finite-difference gradient checks for the
// MLP, closed-form checks for the rank metrics. Returns the number of failed
// checks; verbose prints one line per check.
int run_oracle_checks(bool verbose);

}  // namespace uqxai
