#pragma once

#include "cowpose/geometry.hpp"
#include "cowpose/joints.hpp"
#include "cowpose/skeleton.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <span>

namespace cowpose {

// Offset distribution of one upper-body joint relative to the cow center.
struct JointGaussian {
    Vec2 mean_offset;
    Sym2 covariance;
};

inline constexpr double kDefaultCovarianceEpsilon = 1.0;

// Per-joint Gaussian constraints for the nine upper-body joints. Immutable once
// built. The constructor takes values as given; operations that need a
// positive-definite covariance check it themselves.
class ConstraintModel {
public:
    ConstraintModel(std::array<JointGaussian, kUpperBodyCount> joints, double epsilon, int frames_used);

    const JointGaussian& gaussian(JointId joint) const;
    double epsilon() const { return epsilon_; }
    int frames_used() const { return frames_used_; }

    // |mu_NOSE - mu_TAILHEAD|
    double body_length() const { return body_length_; }

    // Mode of the joint's distribution placed at `center`.
    Vec2 project_joint(Vec2 center, JointId joint) const;

    // Center implied by a candidate: position - mu_j.
    Vec2 backproject_center(const KeypointCandidate& candidate) const;

    // Bivariate normal density of (position - center) under (mu_j, Sigma_j).
    double joint_likelihood(Vec2 center, const KeypointCandidate& candidate) const;
    double joint_log_likelihood(Vec2 center, const KeypointCandidate& candidate) const;

    // Squared Mahalanobis distance of (position - center - mu_j) under Sigma_j.
    double mahalanobis2(Vec2 center, const KeypointCandidate& candidate) const;

    // Largest standard deviation along any principal axis of any joint.
    double max_sigma() const;

    // Reference contour (mu_j in contour order).
    std::vector<Vec2> reference_contour() const;

    // Throws FormatError unless every covariance is SPD with both eigenvalues
    // at least `epsilon` and the body length is positive.
    void validate() const;

private:
    const JointGaussian& checked(JointId joint) const;

    std::array<JointGaussian, kUpperBodyCount> joints_;
    double epsilon_;
    int frames_used_;
    double body_length_;
};

struct FitResult {
    ConstraintModel model;
    int frames_skipped = 0;
};

// Fits one Gaussian per upper-body joint from single-cow labelings. Labelings
// missing any upper-body position are skipped. Needs at least 3 usable frames.
FitResult fit_constraints(std::span<const CowSkeleton> labelings, double epsilon = kDefaultCovarianceEpsilon);

nlohmann::json model_to_json(const ConstraintModel& model);
ConstraintModel model_from_json(const nlohmann::json& doc);

void save_model(const ConstraintModel& model, const std::filesystem::path& path);
ConstraintModel load_model(const std::filesystem::path& path);

} // namespace cowpose
