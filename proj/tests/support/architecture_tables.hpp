#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wavestate/models.hpp"

// Reference layer tables of the three default autoencoders: output shape and
// parameter count of every non-activation layer.
namespace wavestate::test_support {

struct ExpectedRow {
  std::string layer;
  Shape shape;
  std::size_t parameters = 0;
};

struct ExpectedTable {
  ModelType type = ModelType::TypeII;
  std::vector<ExpectedRow> encoder;  // starts with the input row
  std::vector<ExpectedRow> decoder;
  std::size_t encoder_total = 0;
  std::size_t decoder_total = 0;
};

inline std::vector<ExpectedTable> expected_tables() {
  return {
      {ModelType::TypeI,
       {{"Input Layer", {800, 1}, 0},
        {"Conv1D", {800, 64}, 256},
        {"MaxPool1D", {400, 64}, 0},
        {"Conv1D", {400, 32}, 6176},
        {"MaxPool1D", {200, 32}, 0},
        {"Flatten", {6400}, 0},
        {"Dense", {32}, 204832},
        {"Dense", {7}, 231}},
       {{"Dense", {32}, 256},
        {"Dense", {6400}, 211200},
        {"Reshape", {200, 32}, 0},
        {"Upsample1D", {400, 32}, 0},
        {"Conv1D", {400, 64}, 6208},
        {"Upsample1D", {800, 64}, 0},
        {"Conv1D", {800, 1}, 193}},
       211495,
       217857},
      {ModelType::TypeII,
       {{"Input Layer", {800, 9, 1}, 0},
        {"Conv2D", {800, 9, 64}, 640},
        {"MaxPool2D", {400, 3, 64}, 0},
        {"Conv2D", {400, 3, 32}, 18464},
        {"MaxPool2D", {200, 1, 32}, 0},
        {"Flatten", {6400}, 0},
        {"Dense", {32}, 204832},
        {"Dense", {7}, 231}},
       {{"Dense", {32}, 256},
        {"Dense", {6400}, 211200},
        {"Reshape", {200, 1, 32}, 0},
        {"Upsample2D", {400, 3, 32}, 0},
        {"Conv2D", {400, 3, 64}, 18496},
        {"Upsample2D", {800, 9, 64}, 0},
        {"Conv2D", {800, 9, 1}, 577}},
       224167,
       230529},
      {ModelType::TypeIII,
       {{"Input Layer", {800, 3, 3, 1}, 0},
        {"Conv2D", {800, 3, 3, 64}, 640},
        {"MaxPool2D", {800, 1, 1, 64}, 0},
        {"Conv2D", {800, 1, 1, 32}, 18464},
        {"Reshape", {800, 32}, 0},
        {"Dense", {800, 7}, 231}},
       {{"Dense", {800, 32}, 256},
        {"Reshape", {800, 1, 1, 32}, 0},
        {"Conv2D", {800, 1, 1, 64}, 18496},
        {"Upsample2D", {800, 3, 3, 64}, 0},
        {"Conv2D", {800, 3, 3, 1}, 577}},
       19335,
       19329},
  };
}

// Empty when the table matches; otherwise one line per mismatch.
inline std::vector<std::string> table_mismatches(const std::vector<TableRow>& got, const std::vector<ExpectedRow>& want,
                                                 const std::string& what) {
  std::vector<std::string> out;
  if (got.size() != want.size())
    out.push_back(what + ": " + std::to_string(got.size()) + " rows, expected " + std::to_string(want.size()));
  for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
    if (got[i].layer != want[i].layer || got[i].output_shape != want[i].shape || got[i].parameters != want[i].parameters)
      out.push_back(what + " row " + std::to_string(i) + ": " + got[i].layer + " " + shape_string(got[i].output_shape) +
                    " " + std::to_string(got[i].parameters) + ", expected " + want[i].layer + " " +
                    shape_string(want[i].shape) + " " + std::to_string(want[i].parameters));
  }
  return out;
}

}  // namespace wavestate::test_support
