// Copyright 2026 The ctinet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ctinet operator CLI. Exit codes: 0 success, 1 operation error, 2 usage.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ctinet/node.hpp"
#include "ctinet/simnet.hpp"

namespace {

using namespace ctinet;

int usage_error(const std::string& msg) {
  std::cerr << "usage error: " << msg << "\n";
  return 2;
}

Bytes read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "cannot read " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

std::filesystem::path config_path(const std::string& flag) {
  if (const char* env = std::getenv("CTINET_CONFIG"); env && *env) return env;
  return flag;
}

std::filesystem::path chain_dir(const std::string& data_dir, const std::string& config) {
  if (!data_dir.empty()) return std::filesystem::path(data_dir) / "chain";
  const auto cfg = config_path(config);
  if (cfg.empty()) fail(ErrorCode::UsageError, "give --data-dir or --config");
  return node::NodeConfig::load(cfg).data_dir / "chain";
}

int cmd_node_start(const std::string& config) {
  const auto path = config_path(config);
  if (path.empty()) return usage_error("node start needs --config or CTINET_CONFIG");
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // before any thread starts

  node::Node n(node::NodeConfig::load(path));
  n.start();
  std::cout << "listening on port " << n.port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "shutting down" << std::endl;
  n.stop();
  n.wait();
  return 0;
}

int cmd_keygen(const std::string& out) {
  const KeyPair k = gen_keypair();
  node::write_keyfile(out, k);
  std::cout << k.public_key.hex() << "\n";
  return 0;
}

int cmd_hash_password(std::uint64_t n) {
  std::string password;
  std::getline(std::cin, password);
  if (password.size() < 8) fail(ErrorCode::UsageError, "password must be at least 8 characters");
  Rng rng = Rng::from_os();
  std::cout << node::hash_password(password, n, 8, 1, rng) << "\n";
  return 0;
}

int cmd_sim_run(const std::string& script_path, std::optional<std::uint64_t> seed,
                std::string trace_path, const std::string& data_dir) {
  sim::ScenarioScript script = sim::ScenarioScript::load(script_path);
  if (seed) script.seed = *seed;
  if (!data_dir.empty()) script.persist_dir = std::filesystem::path(data_dir) / "chain";
  const sim::Trace trace = sim::run_scenario(script);
  if (trace_path.empty()) trace_path = script.name + ".trace.json";
  std::ofstream out(trace_path, std::ios::binary);
  out << trace.dump();
  if (!out) fail(ErrorCode::Internal, "cannot write " + trace_path);
  std::cout << trace.steps.size() << " steps passed\n" << trace_path << "\n";
  return 0;
}

int cmd_sim_fuzz(std::uint64_t seed, std::size_t ops, std::optional<std::size_t> tamper_after,
                 std::size_t check_every) {
  sim::FuzzOptions options;
  options.tamper_after = tamper_after;
  options.check_every = check_every;
  const sim::FuzzReport r = sim::fuzz_protocol(seed, ops, options);
  std::cout << r.to_json().dump(2) << "\n";
  if (!r.success) {
    std::cerr << "InvariantViolation: " << r.violation << "\n";
    return 1;
  }
  return 0;
}

int cmd_chain_verify(const std::filesystem::path& dir, const std::string& channel) {
  std::vector<std::filesystem::path> files;
  if (!channel.empty()) {
    if (!is_valid_channel_id(channel)) fail(ErrorCode::SchemaViolation, "bad channel id");
    files.push_back(dir / (channel + ".chain"));
    if (!std::filesystem::exists(files.back())) {
      fail(ErrorCode::UnknownChannel, "no chain file for " + channel);
    }
  } else {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() == ".chain") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }
  bool all_ok = true;
  for (const auto& f : files) {
    const bool ok = verify_records(read_file(f));
    all_ok = all_ok && ok;
    std::cout << (ok ? "OK " : "FAILED ") << f.stem().string() << "\n";
  }
  return all_ok ? 0 : 1;
}

int cmd_export_white(const std::filesystem::path& dir, const std::string& out_path) {
  const Bytes records = read_file(dir / (std::string(kPublicChannel) + ".chain"));
  const std::vector<Block> blocks = parse_records(records);
  if (!verify_blocks(blocks)) fail(ErrorCode::InvariantViolation, "public chain fails verification");
  nlohmann::json j{{"channel", kPublicChannel}, {"blocks", nlohmann::json::array()}};
  for (const auto& b : blocks) j["blocks"].push_back(b.to_json());
  std::ofstream out(out_path, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::Internal, "cannot write " + out_path);
  std::cout << blocks.size() << " blocks written to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctinet: permissioned CTI sharing network"};
  app.require_subcommand(1);

  auto* node_cmd = app.add_subcommand("node", "Run a network node");
  node_cmd->require_subcommand(1);
  auto* node_start = node_cmd->add_subcommand("start", "Serve the HTTP API");
  std::string config;
  node_start->add_option("--config", config, "Config file (CTINET_CONFIG overrides)");

  auto* keygen = app.add_subcommand("keygen", "Generate an X25519 key file");
  std::string key_out;
  keygen->add_option("--out", key_out, "Output path")->required();

  auto* hashpw = app.add_subcommand("hash-password", "Hash a password read from stdin");
  std::uint64_t scrypt_n = 16384;
  hashpw->add_option("--scrypt-n", scrypt_n, "scrypt cost parameter");

  auto* sim_cmd = app.add_subcommand("sim", "Deterministic simulation");
  sim_cmd->require_subcommand(1);
  auto* sim_run = sim_cmd->add_subcommand("run", "Run a scenario script");
  std::string script;
  std::optional<std::uint64_t> seed;
  std::string trace;
  sim_run->add_option("script", script, "Scenario JSON")->required();
  sim_run->add_option("--seed", seed, "Override the script seed");
  sim_run->add_option("--trace", trace, "Trace output path");
  std::string sim_data_dir;
  sim_run->add_option("--data-dir", sim_data_dir, "Also write the simulated chains here");
  auto* sim_fuzz = sim_cmd->add_subcommand("fuzz", "Randomized protocol run with invariant checks");
  std::uint64_t fuzz_seed = 7;
  std::size_t fuzz_ops = 10000;
  std::optional<std::size_t> tamper_after;
  sim_fuzz->add_option("--seed", fuzz_seed, "Seed");
  sim_fuzz->add_option("--ops", fuzz_ops, "Number of operations")->check(CLI::PositiveNumber);
  sim_fuzz->add_option("--tamper-after", tamper_after, "Flip a committed bit after this op");
  std::size_t check_every = 100;
  sim_fuzz->add_option("--check-every", check_every, "Invariant check interval (0: only at the end)");

  auto* chain_cmd = app.add_subcommand("chain", "Ledger maintenance");
  chain_cmd->require_subcommand(1);
  auto* chain_verify = chain_cmd->add_subcommand("verify", "Verify persisted chains");
  std::string channel;
  std::string data_dir;
  chain_verify->add_option("--channel", channel, "Channel id (default: all)");
  chain_verify->add_option("--data-dir", data_dir, "Node data directory");
  chain_verify->add_option("--config", config, "Node config file");

  auto* export_cmd = app.add_subcommand("export", "Export ledger data");
  export_cmd->require_subcommand(1);
  auto* export_white = export_cmd->add_subcommand("white", "Export the WHITE channel");
  std::string export_out;
  export_white->add_option("--out", export_out, "Output path")->required();
  export_white->add_option("--data-dir", data_dir, "Node data directory");
  export_white->add_option("--config", config, "Node config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (node_start->parsed()) return cmd_node_start(config);
    if (keygen->parsed()) return cmd_keygen(key_out);
    if (hashpw->parsed()) return cmd_hash_password(scrypt_n);
    if (sim_run->parsed()) return cmd_sim_run(script, seed, trace, sim_data_dir);
    if (sim_fuzz->parsed()) return cmd_sim_fuzz(fuzz_seed, fuzz_ops, tamper_after, check_every);
    if (chain_verify->parsed()) return cmd_chain_verify(chain_dir(data_dir, config), channel);
    if (export_white->parsed()) return cmd_export_white(chain_dir(data_dir, config), export_out);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::UsageError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return usage_error(app.help());
}
