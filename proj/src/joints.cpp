#include "cowpose/joints.hpp"

#include "cowpose/error.hpp"

#include <string>

namespace cowpose {

namespace {

constexpr std::array<std::string_view, kJointCount> kNames = {
    "NOSE",           "HEAD",           "NECK_TOP",        "NECK_BOTTOM",    "SHOULDER",
    "SPINE",          "TAILHEAD",       "MID_THIGH",       "SHOULDER_BOTTOM", "RIGHT_FRONT_LEG",
    "RIGHT_FRONT_HOOF", "LEFT_FRONT_LEG", "LEFT_FRONT_HOOF", "RIGHT_BACK_LEG", "RIGHT_BACK_HOOF",
    "LEFT_BACK_LEG",  "LEFT_BACK_HOOF",
};

} // namespace

std::string_view joint_name(JointId j) { return kNames.at(index(j)); }

std::optional<JointId> joint_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kJointCount; ++i) {
        if (kNames[i] == name) {
            return joint_at(i);
        }
    }
    return std::nullopt;
}

const Limb& limb_of(JointId j) {
    for (const auto& limb : kLimbs) {
        if (limb.leg == j || limb.hoof == j) {
            return limb;
        }
    }
    throw InvalidArgument("joint " + std::string(joint_name(j)) + " is not a limb joint");
}

} // namespace cowpose
