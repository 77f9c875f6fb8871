#include <cmath>
#include <set>

#include "detail/yaml_reader.hpp"
#include "fcto/tasks.hpp"

namespace fcto {

namespace {

constexpr double kDeg = M_PI / 180.0;

using detail::YamlReader;

ContactFlags read_stance(const YamlReader& in, const YAML::Node& node, const std::string& ctx) {
  if (!node.IsSequence()) in.fail(node, ctx, "expected a list of leg names");
  ContactFlags flags{false, false, false, false};
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string name = in.string(node[i], ctx);
    bool found = false;
    for (Leg leg : kLegs) {
      if (name == kLegNames[index(leg)]) {
        if (flags[index(leg)]) in.fail(node[i], ctx, "leg '" + name + "' listed twice");
        flags[index(leg)] = true;
        found = true;
      }
    }
    if (!found) in.fail(node[i], ctx, "unknown leg '" + name + "' (expected lf, lh, rf, rh)");
  }
  return flags;
}

void read_state_weights(const YamlReader& in, const YAML::Node& map, const std::string& ctx,
                        StateWeights& w) {
  if (!map.IsMap()) in.fail(map, ctx, "expected a mapping");
  static const std::set<std::string> keys = {"base_xy", "base_z", "roll_pitch", "yaw",
                                             "linear_velocity", "angular_velocity", "footholds"};
  for (const auto& kv : map) {
    const std::string key = kv.first.Scalar();
    if (!keys.count(key)) in.fail(kv.first, ctx + "." + key, "unknown weight");
  }
  w.base_xy = in.number(map, "base_xy", ctx, w.base_xy);
  w.base_z = in.number(map, "base_z", ctx, w.base_z);
  w.roll_pitch = in.number(map, "roll_pitch", ctx, w.roll_pitch);
  w.yaw = in.number(map, "yaw", ctx, w.yaw);
  w.linear_velocity = in.number(map, "linear_velocity", ctx, w.linear_velocity);
  w.angular_velocity = in.number(map, "angular_velocity", ctx, w.angular_velocity);
  w.footholds = in.number(map, "footholds", ctx, w.footholds);
}

void check_non_negative(const YamlReader& in, const YAML::Node& node, const std::string& ctx,
                        double value) {
  if (value < 0.0) in.fail(node, ctx, "must be non-negative");
}

TaskDescription read(const YamlReader& in) {
  const YAML::Node& root = in.root();
  TaskDescription d;

  const YAML::Node task = in.require(root, "task", "");
  d.name = in.string(in.require(task, "name", "task"), "task.name");
  d.duration = in.number(in.require(task, "duration", "task"), "task.duration");
  d.dt = in.number(task, "dt", "task", d.dt);
  if (!(d.dt > 0.0)) in.fail(task, "task.dt", "must be positive");
  if (!(d.duration > 0.0)) in.fail(task, "task.duration", "must be positive");

  const YAML::Node phases = in.require(root, "phases", "");
  if (!phases.IsSequence() || phases.size() == 0) in.fail(phases, "phases", "expected a non-empty list");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string ctx = "phases[" + std::to_string(i) + "]";
    const YAML::Node p = phases[i];
    PhaseDescription phase;
    phase.name = in.string(in.require(p, "name", ctx), ctx + ".name");
    phase.duration = in.number(in.require(p, "duration", ctx), ctx + ".duration");
    phase.stance = read_stance(in, in.require(p, "stance", ctx), ctx + ".stance");
    if (!(phase.duration > 0.0)) in.fail(p, ctx + ".duration", "must be positive");
    d.phases.push_back(phase);
  }

  if (in.has(root, "references")) {
    const YAML::Node refs = root["references"];
    if (!refs.IsSequence()) in.fail(refs, "references", "expected a list");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const std::string ctx = "references[" + std::to_string(i) + "]";
      const YAML::Node r = refs[i];
      ReferenceDescription ref;
      const YAML::Node comp = in.require(r, "component", ctx);
      try {
        ref.component = component_from_string(in.string(comp, ctx + ".component"));
      } catch (const Error& e) {
        in.fail(comp, ctx + ".component", e.what());
      }
      if (ref.component == Component::kLemniscate) {
        ref.value = in.number(in.require(r, "amplitude", ctx), ctx + ".amplitude");
        ref.period = in.number(in.require(r, "period", ctx), ctx + ".period");
        if (!(ref.period > 0.0)) in.fail(r, ctx + ".period", "must be positive");
      } else {
        ref.value = in.number(in.require(r, "value", ctx), ctx + ".value");
        if (is_angle(ref.component)) ref.value *= kDeg;
      }
      ref.weight = in.number(in.require(r, "weight", ctx), ctx + ".weight");
      check_non_negative(in, r, ctx + ".weight", ref.weight);
      if (in.has(r, "phases")) {
        const YAML::Node names = r["phases"];
        if (!names.IsSequence()) in.fail(names, ctx + ".phases", "expected a list of phase names");
        for (std::size_t j = 0; j < names.size(); ++j) {
          const std::string name = in.string(names[j], ctx + ".phases");
          const bool known = name == "terminal" ||
                             std::any_of(d.phases.begin(), d.phases.end(),
                                         [&](const PhaseDescription& p) { return p.name == name; });
          if (!known) in.fail(names[j], ctx + ".phases", "unknown phase '" + name + "'");
          ref.phases.push_back(name);
        }
      }
      d.references.push_back(ref);
    }
  }

  if (in.has(root, "weights")) {
    const YAML::Node w = root["weights"];
    if (in.has(w, "state")) read_state_weights(in, w["state"], "weights.state", d.state);
    if (in.has(w, "terminal")) read_state_weights(in, w["terminal"], "weights.terminal", d.terminal);
    if (in.has(w, "control")) {
      const YAML::Node c = w["control"];
      d.force_weight = in.number(c, "force", "weights.control", d.force_weight);
      d.foot_velocity_weight = in.number(c, "foot_velocity", "weights.control", d.foot_velocity_weight);
      check_non_negative(in, c, "weights.control.force", d.force_weight);
      check_non_negative(in, c, "weights.control.foot_velocity", d.foot_velocity_weight);
    }
    d.w_kin = in.number(w, "kinematic", "weights", d.w_kin);
    d.w_fr = in.number(w, "friction", "weights", d.w_fr);
    d.mu = in.number(w, "mu", "weights", d.mu);
    d.barrier_margin = in.number(w, "barrier_margin", "weights", d.barrier_margin);
    check_non_negative(in, w, "weights.kinematic", d.w_kin);
    check_non_negative(in, w, "weights.friction", d.w_fr);
    if (!(d.mu > 0.0)) in.fail(w, "weights.mu", "must be positive");
  }

  if (in.has(root, "bounds")) {
    d.force_max = in.number(root["bounds"], "force_max", "bounds", d.force_max);
  }
  return d;
}

}  // namespace

TaskDescription load_task_description(const std::string& path) { return read(YamlReader(path)); }

TaskDescription parse_task_description(const std::string& path, const std::string& text) {
  return read(YamlReader(path, text));
}

}  // namespace fcto
