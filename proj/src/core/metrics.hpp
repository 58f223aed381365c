#pragma once

#include <vector>

namespace uqxai {

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);

// per-class F1 averaged with support weights
double weighted_f1(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes);

}  // namespace uqxai
