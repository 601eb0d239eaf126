#include "cowpose/skeleton.hpp"

#include "cowpose/error.hpp"

#include <tuple>

namespace cowpose {

bool canonical_less(const KeypointCandidate& a, const KeypointCandidate& b) {
    return std::tuple(index(a.joint), a.position.y, a.position.x, -a.confidence) <
           std::tuple(index(b.joint), b.position.y, b.position.x, -b.confidence);
}

std::string_view status_name(JointStatus s) {
    switch (s) {
    case JointStatus::detected:
        return "detected";
    case JointStatus::predicted:
        return "predicted";
    case JointStatus::absent:
        return "absent";
    case JointStatus::occluded:
        return "occluded";
    }
    return "absent";
}

std::optional<JointStatus> status_from_name(std::string_view name) {
    for (auto s : {JointStatus::detected, JointStatus::predicted, JointStatus::absent, JointStatus::occluded}) {
        if (status_name(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

int CowSkeleton::count_upper(JointStatus status) const {
    int n = 0;
    for (auto j : kUpperBodyJoints) {
        n += (*this)[j].status == status;
    }
    return n;
}

bool CowSkeleton::upper_body_complete() const {
    for (auto j : kUpperBodyJoints) {
        if (!present(j)) {
            return false;
        }
    }
    return true;
}

void CowSkeleton::recompute_center() {
    Vec2 sum;
    int n = 0;
    for (auto j : kUpperBodyJoints) {
        if (present(j)) {
            sum += (*this)[j].position;
            ++n;
        }
    }
    if (n > 0) {
        center = sum / n;
    }
}

Vec2 body_center(std::span<const std::pair<JointId, Vec2>> points) {
    if (points.empty()) {
        throw InvalidArgument("no upper-body points");
    }
    Vec2 sum;
    for (const auto& [joint, p] : points) {
        if (!is_upper_body(joint)) {
            throw InvalidArgument("leg-hoof excluded from center");
        }
        sum += p;
    }
    return sum / static_cast<double>(points.size());
}

} // namespace cowpose
