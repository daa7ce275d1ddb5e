// Copyright 2026 The capsbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"

#include "capsbench/commands.hpp"

using namespace capsbench;

TEST_CASE("training loss decreases every epoch for each variant") {
  for (Variant variant : {Variant::qcn, Variant::qcn_plus, Variant::baseline}) {
    RunConfig config;
    config.variant = variant;
    config.data_dir = CAPSBENCH_DESK_DATA;
    config.subset_size = 1000;
    config.test_subset = 100;
    config.epochs = 5;
    config.batch_size = 32;
    const DatasetPair data = load_datasets(config);
    auto model = build<float>(config.model_config(), {.seed = config.seed});
    const TrainResult result = train_model(model, data, config);
    INFO(to_string(variant));
    REQUIRE(result.epoch_losses.size() == 5);
    for (std::size_t e = 1; e < 5; ++e) CHECK(result.epoch_losses[e] < result.epoch_losses[e - 1]);
    std::string losses;
    for (double l : result.epoch_losses) losses += " " + std::to_string(l);
    MESSAGE(to_string(variant) << " epoch losses" << losses << ", test accuracy " << result.final_test.accuracy);
  }
}
