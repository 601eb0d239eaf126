#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace cowpose {

// The 17 keypoints of the side-view cow model, in canonical plane order.
enum class JointId : std::size_t {
    NOSE = 0,
    HEAD,
    NECK_TOP,
    NECK_BOTTOM,
    SHOULDER,
    SPINE,
    TAILHEAD,
    MID_THIGH,
    SHOULDER_BOTTOM,
    RIGHT_FRONT_LEG,
    RIGHT_FRONT_HOOF,
    LEFT_FRONT_LEG,
    LEFT_FRONT_HOOF,
    RIGHT_BACK_LEG,
    RIGHT_BACK_HOOF,
    LEFT_BACK_LEG,
    LEFT_BACK_HOOF,
};

enum class Region { head, body, leg_hoof };

inline constexpr std::size_t kJointCount = 17;
inline constexpr std::size_t kUpperBodyCount = 9;
inline constexpr std::size_t kLimbJointCount = 8;

constexpr std::size_t index(JointId j) { return static_cast<std::size_t>(j); }
constexpr JointId joint_at(std::size_t i) { return static_cast<JointId>(i); }

constexpr Region region(JointId j) {
    switch (j) {
    case JointId::NOSE:
    case JointId::HEAD:
        return Region::head;
    case JointId::NECK_TOP:
    case JointId::NECK_BOTTOM:
    case JointId::SHOULDER:
    case JointId::SPINE:
    case JointId::TAILHEAD:
    case JointId::MID_THIGH:
    case JointId::SHOULDER_BOTTOM:
        return Region::body;
    default:
        return Region::leg_hoof;
    }
}

constexpr bool is_upper_body(JointId j) { return region(j) != Region::leg_hoof; }

// Upper-body joints occupy the first nine plane indices.
constexpr std::array<JointId, kUpperBodyCount> kUpperBodyJoints = {
    JointId::NOSE,     JointId::HEAD,  JointId::NECK_TOP, JointId::NECK_BOTTOM,     JointId::SHOULDER,
    JointId::SPINE,    JointId::TAILHEAD, JointId::MID_THIGH, JointId::SHOULDER_BOTTOM,
};

constexpr std::array<JointId, kLimbJointCount> kLimbJoints = {
    JointId::RIGHT_FRONT_LEG, JointId::RIGHT_FRONT_HOOF, JointId::LEFT_FRONT_LEG, JointId::LEFT_FRONT_HOOF,
    JointId::RIGHT_BACK_LEG,  JointId::RIGHT_BACK_HOOF,  JointId::LEFT_BACK_LEG,  JointId::LEFT_BACK_HOOF,
};

// Closed body outline: nose, head, top of neck, shoulder, spine, tailhead, thigh,
// bottom corners, bottom of neck, back to the nose.
constexpr std::array<JointId, kUpperBodyCount> kContourOrder = {
    JointId::NOSE,      JointId::HEAD,            JointId::NECK_TOP,
    JointId::SHOULDER,  JointId::SPINE,           JointId::TAILHEAD,
    JointId::MID_THIGH, JointId::SHOULDER_BOTTOM, JointId::NECK_BOTTOM,
};

enum class LimbEnd { front, back };
enum class Side { right, left };

struct Limb {
    LimbEnd end;
    Side side;
    JointId anchor;
    JointId leg;
    JointId hoof;
};

constexpr std::array<Limb, 4> kLimbs = {{
    {LimbEnd::front, Side::right, JointId::SHOULDER_BOTTOM, JointId::RIGHT_FRONT_LEG, JointId::RIGHT_FRONT_HOOF},
    {LimbEnd::front, Side::left, JointId::SHOULDER_BOTTOM, JointId::LEFT_FRONT_LEG, JointId::LEFT_FRONT_HOOF},
    {LimbEnd::back, Side::right, JointId::MID_THIGH, JointId::RIGHT_BACK_LEG, JointId::RIGHT_BACK_HOOF},
    {LimbEnd::back, Side::left, JointId::MID_THIGH, JointId::LEFT_BACK_LEG, JointId::LEFT_BACK_HOOF},
}};

constexpr bool is_hoof(JointId j) {
    return j == JointId::RIGHT_FRONT_HOOF || j == JointId::LEFT_FRONT_HOOF || j == JointId::RIGHT_BACK_HOOF ||
           j == JointId::LEFT_BACK_HOOF;
}

// Limb that owns a leg or hoof joint.
const Limb& limb_of(JointId j);

std::string_view joint_name(JointId j);
std::optional<JointId> joint_from_name(std::string_view name);

} // namespace cowpose
