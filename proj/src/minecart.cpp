#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "lcmopg/envs.hpp"

namespace lcmopg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void put(std::ostream& os, const char* key, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  os << key << " = " << std::string(buf, res.ptr) << '\n';
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double clip(double v, double lo, double hi) { return v <= lo ? lo : v >= hi ? hi : v; }

// Floored modulo, result in [0, 360).
double wrap_degrees(double a) {
  const double r = std::fmod(a, 360.0);
  return r < 0.0 ? r + 360.0 : r;
}

}  // namespace

MinecartConfig load_minecart_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open minecart config: " + file.string());
  MinecartConfig cfg;
  std::map<std::string, double*> reals = {
      {"capacity", &cfg.capacity},         {"rotation_deg", &cfg.rotation_deg},
      {"acceleration", &cfg.acceleration}, {"deceleration", &cfg.deceleration},
      {"max_speed", &cfg.max_speed},       {"eps_speed", &cfg.eps_speed},
      {"fuel_idle", &cfg.fuel_idle},       {"fuel_accelerate", &cfg.fuel_accelerate},
      {"fuel_mine", &cfg.fuel_mine},       {"mine_radius", &cfg.mine_radius},
      {"home_radius", &cfg.home_radius},   {"initial_angle_deg", &cfg.initial_angle_deg}};
  bool header = false;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "minecart-config 1") throw std::runtime_error("minecart config: bad header");
      header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("minecart config: expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "mine") {
      std::istringstream vs(value);
      MinecartMine m;
      if (!(vs >> m.x >> m.y >> m.ore1 >> m.ore2))
        throw std::runtime_error("minecart config: mine needs x y ore1 ore2");
      cfg.mines.push_back(m);
    } else if (key == "frame_skip") {
      cfg.frame_skip = std::stoi(value);
    } else if (key == "full_capacity_points") {
      cfg.full_capacity_points = std::stoi(value);
    } else if (auto it = reals.find(key); it != reals.end()) {
      *it->second = std::stod(value);
    } else {
      throw std::runtime_error("minecart config: unknown key " + key);
    }
  }
  if (!header) throw std::runtime_error("minecart config: missing header");
  if (cfg.mines.empty()) throw std::runtime_error("minecart config: no mines");
  if (cfg.frame_skip < 1) throw std::runtime_error("minecart config: frame_skip must be >= 1");
  return cfg;
}

void write_minecart_config(std::ostream& os, const MinecartConfig& c) {
  os << "minecart-config 1\n";
  put(os, "capacity", c.capacity);
  os << "frame_skip = " << c.frame_skip << '\n';
  put(os, "rotation_deg", c.rotation_deg);
  put(os, "acceleration", c.acceleration);
  put(os, "deceleration", c.deceleration);
  put(os, "max_speed", c.max_speed);
  put(os, "eps_speed", c.eps_speed);
  put(os, "fuel_idle", c.fuel_idle);
  put(os, "fuel_accelerate", c.fuel_accelerate);
  put(os, "fuel_mine", c.fuel_mine);
  put(os, "mine_radius", c.mine_radius);
  put(os, "home_radius", c.home_radius);
  put(os, "initial_angle_deg", c.initial_angle_deg);
  os << "full_capacity_points = " << c.full_capacity_points << '\n';
  for (const auto& m : c.mines)
    os << "mine = " << fmt(m.x) << ' ' << fmt(m.y) << ' ' << fmt(m.ore1) << ' ' << fmt(m.ore2)
       << '\n';
}

MinecartConfig default_minecart_config() {
  return load_minecart_config(data_dir() / "minecart.cfg");
}

std::vector<ReturnVector> minecart_full_capacity_loads(const MinecartConfig& config) {
  // Each mining step applies frame_skip frames at one mine; the frame that
  // overflows the cart is scaled down to the free capacity.
  struct Load {
    double a, b;
  };
  auto key = [](double a, double b) {
    return std::pair<long long, long long>{std::llround(a * 1e9), std::llround(b * 1e9)};
  };
  std::set<std::pair<long long, long long>> seen, full_seen;
  std::vector<Load> frontier{{0.0, 0.0}};
  std::vector<ReturnVector> full;
  seen.insert(key(0, 0));
  while (!frontier.empty()) {
    std::vector<Load> next;
    for (const Load& l : frontier) {
      for (const auto& m : config.mines) {
        if (m.ore1 + m.ore2 <= 0.0) continue;
        double a = l.a, b = l.b;
        for (int f = 0; f < config.frame_skip; ++f) {
          const double free = config.capacity - (a + b);
          double y1 = m.ore1, y2 = m.ore2;
          if (y1 + y2 > free) {
            const double s = free / (y1 + y2);
            y1 *= s;
            y2 *= s;
          }
          a += y1;
          b += y2;
        }
        const auto k = key(a, b);
        if (a + b >= config.capacity - 1e-12) {
          if (full_seen.insert(k).second) full.push_back(ReturnVector{{a, b}});
        } else if (seen.insert(k).second) {
          next.push_back({a, b});
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(full.begin(), full.end(), [](const ReturnVector& x, const ReturnVector& y) {
    return x[0] < y[0] || (x[0] == y[0] && x[1] < y[1]);
  });
  return full;
}

Minecart::Minecart(MinecartConfig config) : config_(std::move(config)) {
  require(!config_.mines.empty(), "Minecart: need at least one mine");
  descriptor_.name = "minecart";
  descriptor_.num_objectives = 3;
  descriptor_.state_dim = 6;
  descriptor_.discrete = true;
  descriptor_.num_actions = 6;
  descriptor_.suggested_embedding = {10, 10, 10, 10, 10, 10};
  angle_ = config_.initial_angle_deg;
}

Vector Minecart::state() const {
  Vector s(6);
  s << x_, y_, speed_, angle_, ore1_, ore2_;
  return s;
}

Vector Minecart::reset(Rng&) {
  x_ = y_ = speed_ = 0.0;
  angle_ = config_.initial_angle_deg;
  ore1_ = ore2_ = 0.0;
  departed_ = ended_ = false;
  return state();
}

bool Minecart::mine_once() {
  if (speed_ >= config_.eps_speed) return false;
  const MinecartMine* nearest = nullptr;
  double best = 0.0;
  for (const auto& m : config_.mines) {
    const double d = std::hypot(x_ - m.x, y_ - m.y);
    if (!nearest || d < best) {
      nearest = &m;
      best = d;
    }
  }
  if (best > config_.mine_radius) return false;
  const double free = config_.capacity - (ore1_ + ore2_);
  double y1 = nearest->ore1, y2 = nearest->ore2;
  const double total = y1 + y2;
  if (total > free) {
    const double s = free / total;
    y1 *= s;
    y2 *= s;
  }
  ore1_ += y1;
  ore2_ += y2;
  return y1 + y2 > 0.0;
}

void Minecart::move_cart() {
  if (speed_ < config_.eps_speed) return;
  const double pre_x = x_, pre_y = y_;
  const double rad = angle_ * std::numbers::pi / 180.0;
  const double vx = speed_ * std::cos(rad);
  const double vy = speed_ * std::sin(rad);
  const double eps = config_.eps_speed, rot = config_.rotation_deg;
  // Hitting a wall at an oblique angle turns the cart to slide along it.
  if (y_ != 0.0 && y_ != 1.0 && (vy > eps || vy < -eps)) {
    if (x_ == 1.0 && vx > 0) angle_ += std::copysign(rot, vy);
    if (x_ == 0.0 && vx < 0) angle_ -= std::copysign(rot, vy);
  }
  if (x_ != 0.0 && x_ != 1.0 && (vx > eps || vx < -eps)) {
    if (y_ == 1.0 && vy > 0) angle_ -= std::copysign(rot, vx);
    if (y_ == 0.0 && vy < 0) angle_ += std::copysign(rot, vx);
  }
  angle_ = wrap_degrees(angle_);
  x_ = clip(pre_x + vx, 0.0, 1.0);
  y_ = clip(pre_y + vy, 0.0, 1.0);
  speed_ = std::hypot(pre_x - x_, pre_y - y_);
}

StepResult Minecart::step(const Action& action, Rng&) {
  require(action.index >= 0 && action.index < 6, "Minecart: invalid action index");
  require(!ended_, "Minecart: step after episode end");
  const int fs = config_.frame_skip;
  StepResult res;
  res.reward = ReturnVector::Zero(3);
  res.reward[2] = config_.fuel_idle * fs;
  if (action.index == kAccelerate) res.reward[2] += config_.fuel_accelerate * fs;
  if (action.index == kMine) res.reward[2] += config_.fuel_mine * fs;

  for (int f = 0; f < fs; ++f) {
    switch (action.index) {
      case kLeft: angle_ = wrap_degrees(angle_ - config_.rotation_deg); break;
      case kRight: angle_ = wrap_degrees(angle_ + config_.rotation_deg); break;
      case kAccelerate: speed_ = clip(speed_ + config_.acceleration, 0.0, config_.max_speed); break;
      case kBrake: speed_ = clip(speed_ - config_.deceleration, 0.0, config_.max_speed); break;
      case kMine: mine_once(); break;
      default: break;
    }
    if (ended_) break;
    move_cart();
    if (std::hypot(x_, y_) < config_.home_radius) {
      if (departed_) {
        ended_ = true;
        res.reward[0] += ore1_;
        res.reward[1] += ore2_;
        ore1_ = ore2_ = 0.0;
      }
    } else {
      departed_ = true;
    }
  }
  res.state = state();
  res.done = ended_;
  return res;
}

Vector Minecart::features(const Vector& s) const {
  Vector f(6);
  f << s[0], s[1], s[2] / config_.max_speed, wrap_degrees(s[3]) / 360.0, s[4] / config_.capacity,
      s[5] / config_.capacity;
  // Guards the embedding's [0, 1] contract against rounding in the ore sums.
  return f.cwiseMax(0.0).cwiseMin(1.0);
}

std::unique_ptr<Environment> Minecart::clone() const { return std::make_unique<Minecart>(*this); }

}  // namespace lcmopg
