#include "cowpose/constraint_model.hpp"

#include "cowpose/error.hpp"
#include "cowpose/json_util.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace cowpose {

ConstraintModel::ConstraintModel(std::array<JointGaussian, kUpperBodyCount> joints, double epsilon, int frames_used)
    : joints_(joints), epsilon_(epsilon), frames_used_(frames_used) {
    body_length_ = distance(joints_[index(JointId::NOSE)].mean_offset, joints_[index(JointId::TAILHEAD)].mean_offset);
}

const JointGaussian& ConstraintModel::checked(JointId joint) const {
    if (!is_upper_body(joint)) {
        throw InvalidArgument("joint " + std::string(joint_name(joint)) +
                              " is a leg-hoof joint; constraints cover the upper body only");
    }
    return joints_[index(joint)];
}

const JointGaussian& ConstraintModel::gaussian(JointId joint) const { return checked(joint); }

Vec2 ConstraintModel::project_joint(Vec2 center, JointId joint) const { return center + checked(joint).mean_offset; }

Vec2 ConstraintModel::backproject_center(const KeypointCandidate& candidate) const {
    return candidate.position - checked(candidate.joint).mean_offset;
}

namespace {

void require_spd(const Sym2& s, JointId joint) {
    if (!(s.xx > 0.0) || !(s.det() > 0.0)) {
        throw InvalidArgument("covariance of " + std::string(joint_name(joint)) + " is not positive definite");
    }
}

} // namespace

double ConstraintModel::mahalanobis2(Vec2 center, const KeypointCandidate& candidate) const {
    const auto& g = checked(candidate.joint);
    require_spd(g.covariance, candidate.joint);
    const Vec2 r = candidate.position - center - g.mean_offset;
    return g.covariance.inverse().quadratic(r);
}

double ConstraintModel::joint_log_likelihood(Vec2 center, const KeypointCandidate& candidate) const {
    const auto& g = checked(candidate.joint);
    const double m2 = mahalanobis2(center, candidate);
    return -0.5 * m2 - std::log(2.0 * std::numbers::pi * std::sqrt(g.covariance.det()));
}

double ConstraintModel::joint_likelihood(Vec2 center, const KeypointCandidate& candidate) const {
    return std::exp(joint_log_likelihood(center, candidate));
}

double ConstraintModel::max_sigma() const {
    double largest = 0.0;
    for (const auto& g : joints_) {
        largest = std::max(largest, g.covariance.eigenvalues().second);
    }
    return std::sqrt(largest);
}

std::vector<Vec2> ConstraintModel::reference_contour() const {
    std::vector<Vec2> contour;
    contour.reserve(kContourOrder.size());
    for (auto j : kContourOrder) {
        contour.push_back(joints_[index(j)].mean_offset);
    }
    return contour;
}

void ConstraintModel::validate() const {
    for (auto j : kUpperBodyJoints) {
        const auto& s = joints_[index(j)].covariance;
        const auto [lo, hi] = s.eigenvalues();
        // Allow for round-off in the eigenvalue computation.
        if (!(lo >= epsilon_ * (1.0 - 1e-9)) || !std::isfinite(hi)) {
            throw FormatError("covariance of " + std::string(joint_name(j)) +
                              " is not positive definite above epsilon");
        }
    }
    if (!(body_length_ > 0.0)) {
        throw FormatError("constraint model has zero body length");
    }
}

FitResult fit_constraints(std::span<const CowSkeleton> labelings, double epsilon) {
    std::array<std::vector<Vec2>, kUpperBodyCount> offsets;
    int used = 0;
    int skipped = 0;
    for (const auto& cow : labelings) {
        if (!cow.upper_body_complete()) {
            ++skipped;
            continue;
        }
        Vec2 c;
        for (auto j : kUpperBodyJoints) {
            c += cow[j].position;
        }
        c = c / static_cast<double>(kUpperBodyCount);
        for (auto j : kUpperBodyJoints) {
            offsets[index(j)].push_back(cow[j].position - c);
        }
        ++used;
    }
    if (used < 3) {
        throw InvalidArgument("insufficient training labels: " + std::to_string(used) +
                              " usable frames, at least 3 required");
    }

    std::array<JointGaussian, kUpperBodyCount> joints{};
    const double n = static_cast<double>(used);
    for (std::size_t j = 0; j < kUpperBodyCount; ++j) {
        const Vec2 mu = mean(offsets[j]);
        Sym2 cov;
        for (const auto& d : offsets[j]) {
            const Vec2 r = d - mu;
            cov.xx += r.x * r.x;
            cov.xy += r.x * r.y;
            cov.yy += r.y * r.y;
        }
        cov.xx = cov.xx / (n - 1.0) + epsilon;
        cov.xy = cov.xy / (n - 1.0);
        cov.yy = cov.yy / (n - 1.0) + epsilon;
        joints[j] = {mu, cov};
    }
    return {ConstraintModel(joints, epsilon, used), skipped};
}

nlohmann::json model_to_json(const ConstraintModel& model) {
    nlohmann::json joints = nlohmann::json::object();
    for (auto j : kUpperBodyJoints) {
        const auto& g = model.gaussian(j);
        joints[std::string(joint_name(j))] = {
            {"mu", {g.mean_offset.x, g.mean_offset.y}},
            {"sigma", {{g.covariance.xx, g.covariance.xy}, {g.covariance.xy, g.covariance.yy}}},
        };
    }
    return {{"joints", joints}, {"epsilon", model.epsilon()}, {"frames_used", model.frames_used()}};
}

ConstraintModel model_from_json(const nlohmann::json& doc) {
    try {
        const auto& joints = doc.at("joints");
        std::array<JointGaussian, kUpperBodyCount> parsed{};
        for (auto j : kUpperBodyJoints) {
            const auto name = std::string(joint_name(j));
            if (!joints.contains(name)) {
                throw FormatError("constraint model is missing joint " + name);
            }
            const auto& entry = joints.at(name);
            const auto& mu = entry.at("mu");
            const auto& sigma = entry.at("sigma");
            if (mu.size() != 2 || sigma.size() != 2 || sigma[0].size() != 2 || sigma[1].size() != 2) {
                throw FormatError("malformed mu/sigma for joint " + name);
            }
            const double off_diag = sigma[0][1].get<double>();
            if (off_diag != sigma[1][0].get<double>()) {
                throw FormatError("sigma of joint " + name + " is not symmetric");
            }
            parsed[index(j)] = {{mu[0].get<double>(), mu[1].get<double>()},
                                {sigma[0][0].get<double>(), off_diag, sigma[1][1].get<double>()}};
        }
        for (const auto& [key, value] : joints.items()) {
            const auto joint = joint_from_name(key);
            if (!joint || !is_upper_body(*joint)) {
                throw FormatError("unexpected joint '" + key + "' in constraint model");
            }
        }
        ConstraintModel model(parsed, doc.at("epsilon").get<double>(), doc.at("frames_used").get<int>());
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed constraint model: ") + e.what());
    }
}

void save_model(const ConstraintModel& model, const std::filesystem::path& path) {
    write_json_file(model_to_json(model), path);
}

ConstraintModel load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

} // namespace cowpose
