#include <gtest/gtest.h>

#include "hnav/arbiter/arbiter.hpp"

using namespace hnav;
using namespace hnav::arbiter;

namespace {

class FixedPilot : public Pilot {
 public:
  PilotChoice choose(const policy::Observation&, const sim::VehicleState&) const override {
    PilotChoice c;
    c.action = 2;
    c.command.velocity = {3.0, 0.0};
    return c;
  }
  contingency::ControlSource source() const override { return contingency::ControlSource::Rl; }
};

class RecordingPredictor : public CollisionPredictor {
 public:
  explicit RecordingPredictor(double p) : p_(p) {}
  double probability(const policy::Observation&, int action) const override {
    last_action = action;
    ++calls;
    return p_;
  }
  mutable int last_action = -1;
  mutable int calls = 0;

 private:
  double p_;
};

ArbiterState armed(double threshold = 0.5) {
  ArbiterState s;
  s.threshold = threshold;
  s.kind = ContingencyKind::Expert;
  return s;
}

}  // namespace

TEST(Decide, StrictThreshold) {
  const FixedPilot pilot;
  const policy::Observation obs{};
  const sim::VehicleState st;
  for (auto [p, want] : {std::pair{0.6, true}, std::pair{0.4, false}, std::pair{0.5, false}}) {
    ArbiterState s = armed();
    const RecordingPredictor pred(p);
    const Decision d = decide(obs, st, pilot, &pred, s);
    EXPECT_EQ(d.engage, want) << p;
    EXPECT_EQ(d.probability, p);
    EXPECT_EQ(pred.last_action, 2);  // queried with the tentative action
  }
}

TEST(Decide, ThresholdOneNeverEngages) {
  ArbiterState s = armed(1.0);
  const ConstantPredictor one(1.0);
  EXPECT_FALSE(decide({}, {}, FixedPilot{}, &one, s).engage);
}

TEST(Decide, NoPredictorOrNoKind) {
  ArbiterState s = armed();
  EXPECT_FALSE(decide({}, {}, FixedPilot{}, nullptr, s).engage);
  s.kind = ContingencyKind::None;
  const RecordingPredictor pred(0.9);
  const Decision d = decide({}, {}, FixedPilot{}, &pred, s);
  EXPECT_FALSE(d.engage);
  EXPECT_EQ(pred.calls, 0);
  EXPECT_EQ(d.probability, -1.0);
}

TEST(Decide, CooldownSkipsArbitrationPoints) {
  ArbiterState s = armed();
  s.cooldown = 2;
  s.cooldown_left = 2;
  const RecordingPredictor pred(0.9);
  EXPECT_FALSE(decide({}, {}, FixedPilot{}, &pred, s).engage);
  EXPECT_FALSE(decide({}, {}, FixedPilot{}, &pred, s).engage);
  EXPECT_TRUE(decide({}, {}, FixedPilot{}, &pred, s).engage);
  EXPECT_EQ(pred.calls, 1);
}

TEST(Decide, RejectsContingencyMode) {
  ArbiterState s = armed();
  s.mode = Mode::ContingencyActive;
  const ConstantPredictor zero(0.0);
  EXPECT_THROW(decide({}, {}, FixedPilot{}, &zero, s), std::logic_error);
}

TEST(State, ThresholdRange) {
  ArbiterState s;
  s.threshold = 1.0;
  EXPECT_NO_THROW(s.validate());
  s.threshold = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.threshold = 1.01;
  EXPECT_THROW(s.validate(), ConfigError);
  s.threshold = 0.5;
  s.cooldown = -1;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Pilots, StraightLineHoldsHeading) {
  const StraightLinePilot p;
  sim::VehicleState st;
  st.yaw = 0.2;
  const PilotChoice c = p.choose({}, st);
  EXPECT_EQ(c.command.velocity, (Vec2{3.0, 0.0}));
  EXPECT_EQ(c.command.yaw_mode, sim::YawMode::Target);
  EXPECT_EQ(c.command.yaw_target, 0.0);
  EXPECT_EQ(c.action, static_cast<int>(sim::Action::Forward));
}
