/* Copyright 2026 The fsadv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include <string>

#include <gtest/gtest.h>

#include "fsadv/config.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/harness.hpp"
#include "test_support.hpp"

namespace fsadv {
namespace {

std::string config_error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "expected a config error";
  return {};
}

TEST(ConfigParseTest, TablesDottedKeysAndScalars) {
  ConfigDoc d = parse_config(R"(
# comment
top = 1
[attack]
epsilon = 16/255   # trailing comment
ti.size = 5
name = "a # not comment"
raw = 'c:\path'
flag = true
[models]
pool = ["toy-a",
        "toy-b"]
)");
  EXPECT_EQ(*d.find("top"), "1");
  EXPECT_EQ(*d.find("attack.epsilon"), "16/255");
  EXPECT_EQ(*d.find("attack.ti.size"), "5");
  EXPECT_EQ(*d.find("attack.name"), "a # not comment");
  EXPECT_EQ(*d.find("attack.raw"), "c:\\path");
  EXPECT_EQ(*d.find("attack.flag"), "true");
  EXPECT_EQ(*d.find("models.pool"), "toy-a,toy-b");
}

TEST(ConfigParseTest, ErrorsCarryLine) {
  std::string msg = config_error_text([] { parse_config("a = 1\nb = \n", "c.toml"); });
  EXPECT_NE(msg.find("c.toml:2"), std::string::npos) << msg;
  config_error_text([] { parse_config("[unterminated\n"); });
  config_error_text([] { parse_config("a = 1\na = 2\n"); });
  config_error_text([] { parse_config("a = \"open\n"); });
}

TEST(ConfigParseTest, SnapshotRoundTrip) {
  ConfigDoc d;
  d.set("b.x", "16/255");
  d.set("a", "he said \"hi\"");
  d.set("c", "x,y");
  std::string toml = d.to_toml();
  EXPECT_LT(toml.find("a ="), toml.find("b.x ="));
  EXPECT_EQ(parse_config(toml), d);
}

TEST(ConfigParseTest, OverridesAndLists) {
  ConfigDoc d;
  apply_override(d, "attack.epsilon=8/255");
  apply_override(d, " models.pool = toy-a, toy-c ");
  EXPECT_EQ(*d.find("attack.epsilon"), "8/255");
  EXPECT_EQ(split_list(*d.find("models.pool")), (std::vector<std::string>{"toy-a", "toy-c"}));
  EXPECT_EQ(join_list({"x", "y"}), "x,y");
  config_error_text([&] { apply_override(d, "novalue"); });
}

TEST(ConfigParseTest, MissingFileIsConfigError) {
  config_error_text([] { load_config("/nonexistent/c.toml"); });
}

TEST(CampaignConfigTest, DefaultsAreValid) {
  CampaignConfig c = CampaignConfig::from_doc({});
  c.validate();
  EXPECT_EQ(c.detector.kind, DetectorKind::kMcm);
  EXPECT_EQ(c.sweep_epsilons.size(), 5u);
  EXPECT_EQ(c.attack.ensemble, c.whitebox_ids);
  EXPECT_EQ(c.attack.di.max_size, 32);
}

TEST(CampaignConfigTest, DocRoundTripPreservesDigest) {
  ConfigDoc d;
  d.set("attack.epsilon", "8/255");
  d.set("head.scheme", "probe");
  d.set("models.whitebox", "toy-a,toy-b");
  CampaignConfig c = CampaignConfig::from_doc(d);
  CampaignConfig again = CampaignConfig::from_doc(c.to_doc());
  EXPECT_EQ(again.digest(), c.digest());
  EXPECT_EQ(again.snapshot(), c.snapshot());
  EXPECT_NE(c.snapshot().find("attack.epsilon = \"8/255\""), std::string::npos);
  EXPECT_EQ(c.detector.kind, DetectorKind::kMsp);
}

TEST(CampaignConfigTest, DigestTracksEveryKey) {
  const std::string base = CampaignConfig::from_doc({}).digest();
  ConfigDoc d;
  d.set("render.bins", "31");
  EXPECT_NE(CampaignConfig::from_doc(d).digest(), base);
  EXPECT_EQ(CampaignConfig::from_doc(d).attack_digest(), CampaignConfig::from_doc({}).attack_digest());
  d.set("attack.steps", "21");
  EXPECT_NE(CampaignConfig::from_doc(d).attack_digest(), CampaignConfig::from_doc({}).attack_digest());
}

TEST(CampaignConfigTest, ModeSetsObjective) {
  ConfigDoc d;
  d.set("campaign.mode", "ood2id");
  EXPECT_EQ(CampaignConfig::from_doc(d).attack.objective, ObjectiveKind::kOod2IdTtafs);
  d.set("attack.objective", "id2ood_afs");
  EXPECT_NE(config_error_text([&] { CampaignConfig::from_doc(d); }).find("attack.objective"),
            std::string::npos);
}

TEST(CampaignConfigTest, ErrorsNameTheKey) {
  struct Case {
    const char* key;
    const char* value;
  };
  for (Case c : {Case{"head.scheme", "svm"}, Case{"campaign.mode", "both"},
                 Case{"attack.epsilon", "x"}, Case{"attack.steps", "-3"},
                 Case{"detector.kind", "energy"}, Case{"task.image_size", "4"},
                 Case{"render.width", "10"}, Case{"sweep.epsilons", "0.1,0.05"},
                 Case{"no.such.key", "1"}}) {
    ConfigDoc d;
    d.set(c.key, c.value);
    std::string msg = config_error_text([&] {
      CampaignConfig::from_doc(d).validate();
    });
    EXPECT_NE(msg.find(c.key), std::string::npos) << c.key << ": " << msg;
  }
}

TEST(CampaignConfigTest, StructuralConstraints) {
  ConfigDoc d;
  d.set("models.whitebox", "toy-z");
  config_error_text([&] { CampaignConfig::from_doc(d).validate(); });
  ConfigDoc m;
  m.set("head.scheme", "knn");
  m.set("detector.kind", "mcm");
  config_error_text([&] { CampaignConfig::from_doc(m).validate(); });
  ConfigDoc e;
  e.set("attack.ensemble", "toy-a");
  config_error_text([&] { CampaignConfig::from_doc(e); });
}

TEST(ConfigKeysTest, EveryKeyIsReadByACommandAndResolves) {
  const ConfigDoc resolved = CampaignConfig::from_doc({}).to_doc();
  for (const auto& k : config_keys()) {
    EXPECT_STRNE(k.commands, "") << k.key;
    if (resolved.has(k.key)) continue;
    // Unset optional keys are omitted; setting one must show up.
    ConfigDoc d;
    d.set(k.key, std::string(k.key) == "attack.random_start" ? "true" : "0.01");
    EXPECT_TRUE(CampaignConfig::from_doc(d).to_doc().has(k.key)) << k.key;
  }
  for (const auto& [key, value] : resolved.entries()) {
    bool documented = false;
    for (const auto& k : config_keys()) documented |= key == k.key;
    EXPECT_TRUE(documented) << key;
  }
}

}  // namespace
}  // namespace fsadv
