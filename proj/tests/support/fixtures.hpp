#pragma once

// Shared fixtures for the pipeline, service and acceptance tests.

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>
#include <string>

#include "bec/pipeline/pipeline.hpp"

namespace fixture {

inline const std::string kSource = BEC_SOURCE_DIR;
inline const std::string kCli = BEC_CLI;

/// 2024-03-18, the Date of the Figure 1 email.
inline constexpr bec::mailgraph::Day kFig1Day = 19800;

inline bec::pipeline::PipelineConfig shipped_config() {
  bec::pipeline::PipelineConfig c;
  c.manifest_path = kSource + "/data/manifest.txt";
  c.model_path = kSource + "/data/model.txt";
  c.prefilter_path = kSource + "/data/models/prefilter.txt";
  c.segment_model_path = kSource + "/data/models/segment_classifier.txt";
  c.model_cards_dir = kSource + "/docs/model-cards";
  return c;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
  return s;
}

/// The Figure 1 email as checked in.
inline std::string fig1() { return read_file(kSource + "/tests/data/fig1.eml"); }

/// The Figure 1 email with a masquerading display name, from noreply@evil.name.
/// `sender` and `message_id` replace the address and Message-ID when given.
inline std::string fig1_masquerade(const std::string& message_id = {}, const std::string& sender = {}) {
  std::string s = read_file(kSource + "/tests/data/fig1_masquerade.eml");
  if (!message_id.empty()) s = replace_all(s, "<fig1-masquerade@evil.name>", message_id);
  if (!sender.empty()) s = replace_all(s, "<noreply@evil.name>", "<" + sender + ">");
  return s;
}

/// Records `per_day` emails a day from sender to recipient for the `days` days before `day`.
inline void seed_history(bec::pipeline::Pipeline& p, const std::string& sender, const std::string& recipient,
                         bec::mailgraph::Day day, int days = 30, int per_day = 2) {
  for (int k = 1; k <= days; ++k) {
    for (int i = 0; i < per_day; ++i) {
      p.graph().record_emails(bec::mailgraph::updates_for_email(sender, {recipient}, day - k));
    }
  }
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

/// Runs a shell command from the source directory and captures stdout.
inline CommandResult run(const std::string& args) {
  const std::string cmd = "cd '" + kSource + "' && '" + kCli + "' " + args + " 2>/dev/null";
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// A fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bec_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixture
