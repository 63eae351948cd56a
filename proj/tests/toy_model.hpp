#pragma once

#include "mslu/synthetic.hpp"
#include "mslu/trainer.hpp"

namespace mslu::testing {

// A small model trained once per test binary: a well-fitted tagger plus a
// few adversarial epochs.
inline const Model& toy_model() {
  static const Model model = [] {
    SyntheticCorpusOptions o;
    o.samples = 200;
    TrainConfig c = desk_train_config();
    c.epochs = 3;
    return train(synthetic_corpus(o), desk_model_config(), c).model;
  }();
  return model;
}

}  // namespace mslu::testing
