#include "hdice/harness/probe.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hdice/env/delayed.hpp"
#include "hdice/env/gridworld.hpp"

namespace hdice::harness {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
    throw FormatError("snapshot matrix has inconsistent shape");
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  return m;
}

json mlp_json(const nn::Mlp<double>& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) layers.push_back({{"weight", matrix_json(l.weight)}, {"bias", matrix_json(l.bias)}});
  const auto& t = net.transform();
  return {{"layers", layers},
          {"transform",
           {{"kind", static_cast<int>(t.kind)}, {"scale", t.scale}, {"lo", t.lo}, {"hi", t.hi}, {"split", t.split}}}};
}

nn::Mlp<double> mlp_from(const json& j) {
  std::vector<nn::Mlp<double>::Layer> layers;
  for (const auto& l : j.at("layers")) layers.push_back({matrix_from(l.at("weight")), matrix_from(l.at("bias"))});
  const auto& t = j.at("transform");
  const int kind = t.at("kind").get<int>();
  if (kind < 0 || kind > static_cast<int>(nn::OutputKind::Relu)) throw FormatError("unknown output transform");
  nn::OutputTransform<double> tr{static_cast<nn::OutputKind>(kind), t.at("scale").get<double>(), t.at("lo").get<double>(),
                                 t.at("hi").get<double>(), t.at("split").get<Eigen::Index>()};
  return nn::Mlp<double>(std::move(layers), tr);
}

json normalizer_json(const nn::RunningNormalizer<double>& n) {
  return {{"count", n.count()},
          {"mean", matrix_json(n.mean())},
          {"m2", matrix_json(n.m2())},
          {"enabled", n.enabled()}};
}

nn::RunningNormalizer<double> normalizer_from(const json& j) {
  return nn::RunningNormalizer<double>::restore(j.at("count").get<long>(), matrix_from(j.at("mean")).col(0),
                                                matrix_from(j.at("m2")).col(0), j.at("enabled").get<bool>());
}

json space_json(const env::ActionSpace& s) {
  return {{"discrete", s.is_discrete()}, {"size", s.size()}, {"low", s.low()}, {"high", s.high()}};
}

env::ActionSpace space_from(const json& j) {
  const auto n = j.at("size").get<Eigen::Index>();
  return j.at("discrete").get<bool>() ? env::ActionSpace::discrete(n)
                                      : env::ActionSpace::continuous(n, j.at("low").get<double>(), j.at("high").get<double>());
}

const env::GridSpec* grid_spec_of(const env::Environment& e) {
  if (const auto* g = dynamic_cast<const env::GridWorldEnv*>(&e)) return &g->spec();
  if (const auto* d = dynamic_cast<const env::DelayedRewardEnv*>(&e)) return grid_spec_of(d->inner());
  return nullptr;
}

}  // namespace

std::string snapshot_json(const RunConfig& config, const Models& m) {
  json j;
  j["env"] = config.env;
  j["method"] = std::string(to_string(config.method));
  j["config"] = echo_config(config);
  if (m.policy) {
    const auto& p = *m.policy;
    json pj = {{"space", space_json(p.action_space())},
               {"trunk", mlp_json(p.trunk())},
               {"actor", mlp_json(p.actor())},
               {"log_std", matrix_json(p.log_std())}};
    if (p.value()) pj["value"] = mlp_json(*p.value());
    j["policy"] = pj;
  }
  if (m.hindsight)
    j["hindsight"] = {{"space", space_json(m.hindsight->action_space())},
                      {"net", mlp_json(m.hindsight->net())},
                      {"log_std", matrix_json(m.hindsight->log_std())},
                      {"z_normalizer", normalizer_json(m.hindsight->z_normalizer())}};
  if (m.return_model)
    j["return_model"] = {{"net", mlp_json(m.return_model->net())},
                         {"target_normalizer", normalizer_json(m.return_model->target_normalizer())}};
  if (m.dice)
    j["dice"] = {{"space", space_json(m.dice->action_space())},
                 {"net", mlp_json(m.dice->net())},
                 {"z_normalizer", normalizer_json(m.dice->z_normalizer())}};
  if (m.psi) {
    j["psi"] = {{"kind", std::string(to_string(m.psi->kind()))}};
    if (m.psi->kind() == PsiSampler::Kind::Uniform) {
      j["psi"]["lo"] = m.psi->lo();
      j["psi"]["hi"] = m.psi->hi();
    }
  }
  return j.dump(1) + "\n";
}

Snapshot load_snapshot(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("snapshot is not valid JSON: ") + e.what());
  }
  try {
    Snapshot s;
    s.env = j.at("env").get<std::string>();
    s.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("policy")) {
      const auto& p = j["policy"];
      std::optional<nn::Mlp<double>> value;
      if (p.contains("value")) value = mlp_from(p["value"]);
      s.models.policy = std::make_unique<ActorCritic>(space_from(p.at("space")), mlp_from(p.at("trunk")),
                                                      mlp_from(p.at("actor")), std::move(value),
                                                      matrix_from(p.at("log_std")).row(0));
    }
    if (j.contains("hindsight")) {
      const auto& h = j["hindsight"];
      s.models.hindsight = std::make_unique<HindsightModel>(space_from(h.at("space")), mlp_from(h.at("net")),
                                                            matrix_from(h.at("log_std")).row(0),
                                                            normalizer_from(h.at("z_normalizer")));
    }
    if (j.contains("return_model")) {
      const auto& r = j["return_model"];
      s.models.return_model =
          std::make_unique<ReturnPredictor>(mlp_from(r.at("net")), normalizer_from(r.at("target_normalizer")));
    }
    if (j.contains("dice")) {
      const auto& d = j["dice"];
      s.models.dice = std::make_unique<DiceModel>(space_from(d.at("space")), mlp_from(d.at("net")),
                                                  normalizer_from(d.at("z_normalizer")));
    }
    if (j.contains("psi")) {
      const auto kind = j["psi"].at("kind").get<std::string>();
      s.models.psi = kind == "conditional"
                         ? PsiSampler::conditional()
                         : PsiSampler::uniform(j["psi"].at("lo").get<double>(), j["psi"].at("hi").get<double>());
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed snapshot: ") + e.what());
  }
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read snapshot " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_snapshot(ss.str());
}

std::vector<ProbeRow> probe_state(const Snapshot& snapshot, const Vector& observation, const std::vector<int>& actions,
                                  const std::vector<double>& returns) {
  const auto& m = snapshot.models;
  if (!m.policy || !m.hindsight) throw ContractError("probing needs a policy and a hindsight model in the snapshot");
  const auto& space = m.policy->action_space();
  if (!space.is_discrete()) throw ContractError("probing is defined for discrete action spaces");
  require_dims(observation.size() == m.policy->observation_dim(), "probe observation has the wrong dimension");
  for (int a : actions)
    if (a < 0 || a >= space.size()) throw ContractError("probe action outside the action space");
  for (double z : returns)
    if (!std::isfinite(z)) throw ContractError("probe returns must be finite");

  const RowVector pi = m.policy->probabilities(observation);
  const auto n = static_cast<Eigen::Index>(returns.size());
  const Matrix obs = observation.transpose().replicate(n, 1);
  const Vector z = Eigen::Map<const Vector>(returns.data(), n);
  const Matrix h = m.hindsight->probabilities(obs, z);
  const bool have_dice = m.dice && m.return_model && m.psi;
  const Vector chi = have_dice ? m.return_model->density(obs, z) : Vector::Zero(n);

  std::vector<ProbeRow> rows;
  for (int a : actions) {
    const Matrix act = Matrix::Constant(n, 1, a);
    const Vector phi = have_dice ? m.dice->evaluate(obs, act, z) : Vector::Zero(n);
    const Vector ratio = have_dice ? hdice_ratio(*m.dice, *m.return_model, obs, act, z, *m.psi) : Vector::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      ProbeRow r;
      r.action = a;
      r.action_name = space.size() == 4 ? std::string(env::to_string(static_cast<env::GridAction>(a))) : std::to_string(a);
      r.z = z(k);
      r.pi = pi(a);
      r.h = h(k, a);
      r.direct = direct_ratio(r.pi, r.h);
      r.phi = phi(k);
      r.chi = chi(k);
      r.hdice = ratio(k);
      rows.push_back(r);
    }
  }
  return rows;
}

Vector parse_probe_state(const std::string& json_text, const std::string& env_id) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("probe state is not valid JSON: ") + e.what());
  }
  if (j.contains("observation")) {
    const auto values = j["observation"].get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  if (!j.contains("cell")) throw ParseError("probe state needs 'observation' or 'cell'");
  const auto env = env::make_environment(env_id);
  const env::GridSpec* spec = grid_spec_of(*env);
  if (!spec) throw ContractError("'cell' probe states need a grid world environment");
  const auto cell = j["cell"].get<std::vector<int>>();
  if (cell.size() != 2) throw ParseError("'cell' must be [row, col]");
  env::GridState state = env::grid_reset(*spec);
  state.position = {cell[0], cell[1]};
  if (!spec->in_bounds(state.position)) throw ContractError("probe cell outside the grid");
  if (j.contains("remaining")) {
    const auto bits = j["remaining"].get<std::vector<int>>();
    if (bits.size() != spec->diamonds.size()) throw ParseError("'remaining' needs one entry per diamond");
    state.remaining_diamonds = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) state.remaining_diamonds |= std::uint64_t{1} << i;
  }
  return env::grid_observe(*spec, state);
}

std::vector<int> parse_probe_actions(const std::string& csv, const env::ActionSpace& space) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    int a;
    if (std::isdigit(static_cast<unsigned char>(tok[0]))) {
      a = std::stoi(tok);
    } else {
      if (space.size() != 4) throw ParseError("named actions need a grid world action space");
      a = static_cast<int>(env::parse_grid_action(tok));
    }
    if (a < 0 || a >= space.size()) throw ContractError("probe action '" + tok + "' outside the action space");
    out.push_back(a);
  }
  if (out.empty()) throw ParseError("at least one probe action is required");
  return out;
}

std::string format_probe_table(const std::vector<ProbeRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "action" << std::setw(12) << "z" << std::setw(12) << "pi(a|s)" << std::setw(12)
      << "h(a|s,z)" << std::setw(14) << "direct" << std::setw(14) << "hdice" << "\n";
  out << std::setprecision(6);
  for (const auto& r : rows)
    out << std::setw(8) << r.action_name << std::setw(12) << r.z << std::setw(12) << r.pi << std::setw(12) << r.h
        << std::setw(14) << r.direct << std::setw(14) << r.hdice << "\n";
  return out.str();
}

}  // namespace hdice::harness
