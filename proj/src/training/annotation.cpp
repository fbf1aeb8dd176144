#include "hg/annotation.hpp"

#include <cmath>
#include <stdexcept>

namespace hg {

void Annotation::validate(std::size_t k) const {
    auto fail = [&](const std::string& msg) { throw std::invalid_argument("annotation " + image + ": " + msg); };
    if (joints.size() != k || present.size() != k || visible.size() != k)
        fail("expected " + std::to_string(k) + " joints/present/visible entries");
    for (std::size_t i = 0; i < k; ++i) {
        if (visible[i] && !present[i]) fail("joint " + std::to_string(i) + " is visible but not present");
        if (!std::isfinite(joints[i].x) || !std::isfinite(joints[i].y))
            fail("joint " + std::to_string(i) + " has non-finite coordinates");
    }
    if (!(scale > 0)) fail("scale must be positive");
    if (!(norm_length > 0)) fail("norm_length must be positive");
    if (!std::isfinite(center.x) || !std::isfinite(center.y)) fail("center must be finite");
}

void check_involution(const std::vector<int>& perm) {
    const int n = static_cast<int>(perm.size());
    for (int i = 0; i < n; ++i) {
        if (perm[i] < 0 || perm[i] >= n)
            throw std::invalid_argument("flip permutation entry " + std::to_string(i) + " out of range");
        if (perm[perm[i]] != i)
            throw std::invalid_argument("flip permutation is not an involution at joint " + std::to_string(i));
    }
}

std::vector<int> DatasetHeader::flip_permutation() const {
    const int k = num_joints();
    std::vector<int> perm(k);
    for (int i = 0; i < k; ++i) perm[i] = i;
    std::vector<bool> used(k, false);
    for (auto [a, b] : flip_pairs) {
        if (a < 0 || b < 0 || a >= k || b >= k || a == b)
            throw std::invalid_argument("flip pair (" + std::to_string(a) + "," + std::to_string(b) + ") is invalid");
        if (used[a] || used[b]) throw std::invalid_argument("joint appears in more than one flip pair");
        used[a] = used[b] = true;
        perm[a] = b;
        perm[b] = a;
    }
    return perm;
}

}  // namespace hg
