#pragma once

// Feature-bearing examples as JSON lines:
//   {"question": "...", "answer": "...", "qtype": "...", "image": [..], "point": [..]}
// A missing "image" or "point" key means that modality is absent.

#include <string>
#include <string_view>
#include <vector>

#include "imfvqa/training.hpp"

namespace imfvqa::training {

std::string encode_examples(const std::vector<Example>& examples);
std::vector<Example> decode_examples(std::string_view text);
void save_examples(const std::vector<Example>& examples, const std::string& path);
std::vector<Example> load_examples(const std::string& path);

/// One value per line; blank lines and lines starting with '#' are skipped.
std::vector<double> parse_feature_text(std::string_view text, const std::string& source);
std::vector<double> load_feature_file(const std::string& path);

}  // namespace imfvqa::training
