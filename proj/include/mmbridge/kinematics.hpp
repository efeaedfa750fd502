#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/rng.hpp"

namespace mmbridge::kin {

/// The 18 gesture classes. Families: raises, push/pull, swipes, forearm
/// rotations, circular rotations, plus curl and wave.
enum class Gesture : int {
    FrontRaise = 0,
    LateralRaise,
    LateralToFrontRaise,
    LateralRaise45,
    Push,
    Pull,
    SwipeLeft,
    SwipeRight,
    SwipeUp,
    SwipeDown,
    ForearmSupination,
    ForearmPronation,
    HorizontalRotationCw,
    HorizontalRotationCcw,
    VerticalRotationCw,
    VerticalRotationCcw,
    ArmCurl,
    Wave,
};

inline constexpr int kGestureCount = 18;

inline const char* gesture_name(Gesture g) {
    static constexpr const char* names[kGestureCount] = {
        "front_raise",        "lateral_raise",       "lateral_to_front_raise",
        "lateral_raise_45",   "push",                "pull",
        "swipe_left",         "swipe_right",         "swipe_up",
        "swipe_down",         "forearm_supination",  "forearm_pronation",
        "horizontal_rotation_cw", "horizontal_rotation_ccw", "vertical_rotation_cw",
        "vertical_rotation_ccw",  "arm_curl",         "wave",
    };
    return names[static_cast<int>(g)];
}

inline Gesture gesture_from_name(const std::string& name) {
    for (int i = 0; i < kGestureCount; ++i)
        if (name == gesture_name(static_cast<Gesture>(i))) return static_cast<Gesture>(i);
    throw std::invalid_argument("unknown gesture class: " + name);
}

struct GestureSpec {
    Gesture gesture_class = Gesture::FrontRaise;
    double duration = 2.0;      // seconds
    double amplitude = 0.3;     // meters, characteristic arc length
    int segment_count = 4;      // distal markers kept (hand, wrist, elbow, shoulder)
    double jitter = 0.0;        // per-trial variability scale
    std::uint64_t seed = 0;
};

/// Per-segment motion at the internal simulation rate. Segments are ordered
/// distal to proximal: index 0 is the hand marker, the last one the shoulder.
struct KinematicTrace {
    double sample_rate = 0;                           // Hz
    double duration = 0;                              // seconds
    std::vector<std::string> segment_names;
    std::vector<std::vector<Vec3>> position;          // [segment][sample]
    std::vector<std::vector<Vec3>> acceleration;      // [segment][sample], m/s^2
    std::vector<double> rcs_weight;                   // [segment]

    int segments() const { return static_cast<int>(position.size()); }
    int samples() const { return position.empty() ? 0 : static_cast<int>(position[0].size()); }
};

struct RadarPose {
    Vec3 origin{1.5, 0.0, 1.0};
    Vec3 boresight{-1.0, 0.0, 0.0};
};

inline void validate(const RadarPose& pose) {
    require(std::abs(pose.boresight.norm() - 1.0) <= 1e-12, "radar boresight must be unit norm");
}

struct SegmentSample {
    double radial_distance = 0;   // m
    double radial_velocity = 0;   // m/s, positive receding
    Vec3 acceleration;            // m/s^2
};

inline constexpr double kInternalRate = 1000.0;  // Hz

namespace detail {

// Arm posture: shoulder elevation theta (0 = arm hanging down), shoulder
// azimuth phi (0 = forward +x, positive toward +y), elbow flexion beta,
// forearm roll rho.
struct AngleState {
    double theta, phi, beta, rho;
};

// Smooth monotone ramp 0 -> 1.
inline double ramp(double u) { return 0.5 * (1.0 - std::cos(kPi * u)); }
// Smooth out-and-back pulse 0 -> 1 -> 0.
inline double pulse(double u) { return 0.5 * (1.0 - std::cos(2.0 * kPi * u)); }

// Each gesture is a rest posture plus a canonical angular motion that is zero
// at u = 0. The motion is sized for the default 0.3 m arc and scaled linearly
// by the requested amplitude, so amplitude 0 freezes every class.
inline AngleState gesture_angles(Gesture g, double u, double s) {
    const double r = ramp(u), p = pulse(u);
    const double cyc = std::cos(4 * kPi * u) - 1.0;  // two-cycle in/out, zero at u=0
    AngleState base{0, 0, 0.2, 0};
    AngleState motion{0, 0, 0, 0};
    switch (g) {
        case Gesture::FrontRaise:          base = {0.15, 0, 0.2, 0};      motion = {0.55 * r, 0, 0, 0}; break;
        case Gesture::LateralRaise:        base = {0.15, kPi / 2, 0.2, 0}; motion = {0.55 * r, 0, 0, 0}; break;
        case Gesture::LateralToFrontRaise: base = {0.15, kPi / 2, 0.2, 0}; motion = {0.55 * r, -kPi / 2 * r, 0, 0}; break;
        case Gesture::LateralRaise45:      base = {0.15, kPi / 4, 0.2, 0}; motion = {0.55 * r, 0, 0, 0}; break;
        case Gesture::Push:                base = {kPi / 2, 0, 1.2, 0};   motion = {0, 0, -1.1 * p, 0}; break;
        case Gesture::Pull:                base = {kPi / 2, 0, 0.2, 0};   motion = {0, 0, 1.1 * p, 0}; break;
        case Gesture::SwipeLeft:           base = {1.25, 0, 0.3, 0};      motion = {0, 0.5 * p, 0, 0}; break;
        case Gesture::SwipeRight:          base = {1.25, 0, 0.3, 0};      motion = {0, -0.5 * p, 0, 0}; break;
        case Gesture::SwipeUp:             base = {0.9, 0, 0.3, 0};       motion = {0.45 * p, 0, 0, 0}; break;
        case Gesture::SwipeDown:           base = {1.3, 0, 0.3, 0};       motion = {-0.45 * p, 0, 0, 0}; break;
        case Gesture::ForearmSupination:   base = {kPi / 2, 0, 0.3, 0};   motion = {0, 0, 0, 0.7 * r}; break;
        case Gesture::ForearmPronation:    base = {kPi / 2, 0, 0.3, 0};   motion = {0, 0, 0, -0.7 * r}; break;
        case Gesture::HorizontalRotationCw:
            base = {kPi / 2, 0, 0.85, 0}; motion = {0, 0.25 * std::sin(4 * kPi * u), 0.25 * cyc, 0}; break;
        case Gesture::HorizontalRotationCcw:
            base = {kPi / 2, 0, 0.85, 0}; motion = {0, -0.25 * std::sin(4 * kPi * u), 0.25 * cyc, 0}; break;
        case Gesture::VerticalRotationCw:
            base = {1.2, 0, 0.85, 0};     motion = {0.25 * std::sin(4 * kPi * u), 0, 0.25 * cyc, 0}; break;
        case Gesture::VerticalRotationCcw:
            base = {1.2, 0, 0.85, 0};     motion = {-0.25 * std::sin(4 * kPi * u), 0, 0.25 * cyc, 0}; break;
        case Gesture::ArmCurl:             base = {0.3, 0, 0.1, 0};       motion = {0, 0, 0.95 * r, 0}; break;
        case Gesture::Wave:                base = {1.35, 0, 0.6, 0};      motion = {0, 0.2 * std::sin(6 * kPi * u), 0, 0}; break;
    }
    return {base.theta + s * motion.theta, base.phi + s * motion.phi,
            base.beta + s * motion.beta, base.rho + s * motion.rho};
}

inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
    // Rodrigues rotation; axis must be unit length.
    const double c = std::cos(angle), s = std::sin(angle);
    return v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c));
}

struct ArmGeometry {
    Vec3 shoulder{0.0, 0.0, 1.35};
    double upper_arm = 0.30;
    double forearm = 0.25;
    double hand = 0.18;
    double hand_offset = 0.06;  // lateral offset of the hand marker; makes roll visible
};

// Positions ordered distal -> proximal: hand, wrist, elbow, shoulder.
inline std::array<Vec3, 4> forward_kinematics(const AngleState& s, const ArmGeometry& g) {
    const Vec3 dir{std::sin(s.theta) * std::cos(s.phi), std::sin(s.theta) * std::sin(s.phi),
                   -std::cos(s.theta)};
    // Horizontal axis perpendicular to the arm plane; well defined for all theta.
    const Vec3 flex_axis{-std::sin(s.phi), std::cos(s.phi), 0.0};
    const Vec3 elbow = g.shoulder + dir * g.upper_arm;
    const Vec3 fdir = rotate(dir, flex_axis, -s.beta);  // flexion lifts the forearm
    const Vec3 wrist = elbow + fdir * g.forearm;
    const Vec3 n2 = fdir.cross(flex_axis).normalized();
    const Vec3 roll_dir = flex_axis * std::cos(s.rho) + n2 * std::sin(s.rho);
    const Vec3 hand = wrist + fdir * g.hand + roll_dir * g.hand_offset;
    return {hand, wrist, elbow, g.shoulder};
}

}  // namespace detail

/// Generate the motion trace for one gesture trial. Deterministic in
/// (spec, spec.seed); 1 kHz internal rate.
inline KinematicTrace make_gesture(const GestureSpec& spec) {
    require(spec.duration > 0, "gesture duration must be positive");
    require(spec.amplitude >= 0, "gesture amplitude must be non-negative");
    require(spec.segment_count >= 1 && spec.segment_count <= 4,
            "segment_count must be in [1,4]");

    Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(spec.gesture_class)));
    // Smooth per-trial perturbations: amplitude scale, time skew, angular wobble.
    const double amp_scale = 1.0 + 0.20 * spec.jitter * (2.0 * rng.uniform() - 1.0);
    const double time_skew = 0.10 * spec.jitter * (2.0 * rng.uniform() - 1.0);
    const double wobble_mag = 0.08 * spec.jitter * rng.uniform();
    const double wobble_phase = 2.0 * kPi * rng.uniform();

    const int n = static_cast<int>(std::lround(spec.duration * kInternalRate)) + 1;
    const double dt = 1.0 / kInternalRate;
    // Linear motion scale relative to the canonical 0.3 m arc.
    const double motion_scale = spec.amplitude * amp_scale / 0.3;

    detail::ArmGeometry geom;
    std::vector<std::array<Vec3, 4>> pose(n);
    for (int i = 0; i < n; ++i) {
        double u = static_cast<double>(i) / (n - 1);
        u = std::clamp(u * (1.0 + time_skew * std::sin(kPi * u)), 0.0, 1.0);
        detail::AngleState a = detail::gesture_angles(spec.gesture_class, u, motion_scale);
        const double wob = motion_scale * wobble_mag * std::sin(2.0 * kPi * u + wobble_phase);
        a.theta += wob;
        a.phi += 0.5 * wob;
        pose[i] = detail::forward_kinematics(a, geom);
    }

    static constexpr const char* seg_names[4] = {"hand", "wrist", "elbow", "shoulder"};
    static constexpr double seg_rcs[4] = {1.0, 0.7, 0.4, 0.2};

    KinematicTrace trace;
    trace.sample_rate = kInternalRate;
    trace.duration = (n - 1) * dt;
    const int segs = spec.segment_count;
    trace.segment_names.reserve(segs);
    trace.position.resize(segs);
    trace.acceleration.resize(segs);
    for (int s = 0; s < segs; ++s) {
        trace.segment_names.emplace_back(seg_names[s]);
        trace.rcs_weight.push_back(seg_rcs[s]);
        auto& pos = trace.position[s];
        auto& acc = trace.acceleration[s];
        pos.resize(n);
        acc.resize(n);
        for (int i = 0; i < n; ++i) pos[i] = pose[i][s];
        // Acceleration as the central second difference; replicate at the ends.
        for (int i = 1; i + 1 < n; ++i)
            acc[i] = (pos[i + 1] - pos[i] * 2.0 + pos[i - 1]) * (1.0 / (dt * dt));
        if (n >= 3) {
            acc[0] = acc[1];
            acc[n - 1] = acc[n - 2];
        }
    }
    return trace;
}

/// Index of a named segment in the trace; throws if absent.
inline int segment_index(const KinematicTrace& trace, const std::string& name) {
    for (int s = 0; s < trace.segments(); ++s)
        if (trace.segment_names[s] == name) return s;
    throw std::invalid_argument("trace has no segment named " + name);
}

namespace detail {

// Linearly interpolated segment position; radar phase evolves at millimeter
// scale between the 1 kHz kinematic samples, so nearest-sample reads are far
// too coarse.
inline Vec3 position_at(const KinematicTrace& trace, int segment, double t) {
    const double x = t * trace.sample_rate;
    const int n = trace.samples();
    const int i0 = std::clamp(static_cast<int>(std::floor(x)), 0, n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    const double f = std::clamp(x - i0, 0.0, 1.0);
    const Vec3& a = trace.position[segment][i0];
    const Vec3& b = trace.position[segment][i1];
    return a + (b - a) * f;
}

}  // namespace detail

/// Per-segment radial geometry relative to the radar at time t.
inline std::vector<SegmentSample> sample_kinematics(const KinematicTrace& trace,
                                                    const RadarPose& pose, double t) {
    validate(pose);
    if (t < 0 || t > trace.duration)
        throw std::out_of_range("sample time outside trace duration");
    const double h = 1.0 / trace.sample_rate;  // central-difference step
    const double t_lo = std::max(t - h, 0.0), t_hi = std::min(t + h, trace.duration);
    const int nearest =
        std::clamp(static_cast<int>(std::lround(t * trace.sample_rate)), 0, trace.samples() - 1);

    std::vector<SegmentSample> out(trace.segments());
    for (int s = 0; s < trace.segments(); ++s) {
        out[s].radial_distance = (detail::position_at(trace, s, t) - pose.origin).norm();
        const double d_lo = (detail::position_at(trace, s, t_lo) - pose.origin).norm();
        const double d_hi = (detail::position_at(trace, s, t_hi) - pose.origin).norm();
        out[s].radial_velocity = t_hi > t_lo ? (d_hi - d_lo) / (t_hi - t_lo) : 0.0;
        out[s].acceleration = trace.acceleration[s][nearest];
    }
    return out;
}

}  // namespace mmbridge::kin
