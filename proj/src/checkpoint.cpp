#include "tdoa/filters.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tdoa::filters {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json strategy_json(const manifold::ProjectionStrategy& s) { return s.name(); }

}  // namespace

void Tracker::save_checkpoint(std::ostream& out) const {
  json j;
  j["format"] = "tdoa-tracker-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = to_string(kind_);
  j["config"] = {{"m", cfg_.m},
                 {"resample_sigma", cfg_.resample_sigma},
                 {"alpha", cfg_.alpha},
                 {"strategy", strategy_json(cfg_.strategy)},
                 {"rng_seed", cfg_.rng_seed}};
  j["scoring"] = {{"z0", scoring_.z0}, {"sigma_z_sq", scoring_.sigma_z_sq}};
  j["step"] = step_;
  std::ostringstream rng_state;
  rng_state << rng_;
  j["rng_state"] = rng_state.str();
  json parts = json::array();
  for (const auto& p : particles_) {
    parts.push_back({{"state", std::vector<double>(p.state.data(), p.state.data() + p.state.size())},
                     {"weight", p.weight},
                     {"regret", p.regret},
                     {"birth_depth", p.birth_depth}});
  }
  j["particles"] = std::move(parts);
  out << j.dump(1) << '\n';
}

Tracker Tracker::load_checkpoint(std::istream& in, std::shared_ptr<const manifold::PdTree> tree) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "tdoa-tracker-checkpoint") throw std::runtime_error("not a tracker checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");

  Tracker t;
  t.kind_ = parse_filter_kind(j.at("kind").get<std::string>());
  const auto& c = j.at("config");
  t.cfg_.m = c.at("m").get<int>();
  t.cfg_.resample_sigma = c.at("resample_sigma").get<double>();
  t.cfg_.alpha = c.at("alpha").get<double>();
  t.cfg_.strategy = manifold::ProjectionStrategy::parse(c.at("strategy").get<std::string>());
  t.cfg_.rng_seed = c.at("rng_seed").get<std::uint64_t>();
  t.cfg_.validate();
  t.scoring_.z0 = j.at("scoring").at("z0").get<double>();
  t.scoring_.sigma_z_sq = j.at("scoring").at("sigma_z_sq").get<double>();
  t.scoring_.validate();
  t.step_ = j.at("step").get<std::size_t>();
  std::istringstream rng_state(j.at("rng_state").get<std::string>());
  rng_state >> t.rng_;
  if (!rng_state) throw std::runtime_error("checkpoint: bad rng_state");

  t.tree_ = std::move(tree);
  if (t.cfg_.strategy.projects() && !t.tree_) {
    throw std::invalid_argument("checkpoint uses projection strategy '" + t.cfg_.strategy.name() +
                                "' but no tree was supplied");
  }
  for (const auto& p : j.at("particles")) {
    Particle part;
    const auto state = p.at("state").get<std::vector<double>>();
    part.state = Eigen::Map<const Vector>(state.data(), static_cast<Eigen::Index>(state.size()));
    part.weight = p.at("weight").get<double>();
    part.regret = p.at("regret").get<double>();
    part.birth_depth = p.at("birth_depth").get<int>();
    t.particles_.push_back(std::move(part));
  }
  if (static_cast<int>(t.particles_.size()) != t.cfg_.m) {
    throw std::runtime_error("checkpoint: particle count does not match m");
  }
  return t;
}

void Tracker::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_checkpoint(out);
}

Tracker Tracker::load_checkpoint(const std::filesystem::path& path,
                                 std::shared_ptr<const manifold::PdTree> tree) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return load_checkpoint(in, std::move(tree));
}

}  // namespace tdoa::filters
