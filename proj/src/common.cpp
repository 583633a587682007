#include "mousesim/error.hpp"
#include "mousesim/rng.hpp"

#include <cmath>
#include <limits>

namespace mousesim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSchema: return "UnknownSchema";
        case ErrorCode::EmptyLog: return "EmptyLog";
        case ErrorCode::NonpositiveResolution: return "NonpositiveResolution";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::DegenerateSegment: return "DegenerateSegment";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::NoOtherUsers: return "NoOtherUsers";
        case ErrorCode::TooFewUsers: return "TooFewUsers";
        case ErrorCode::TooFewInstances: return "TooFewInstances";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NonfiniteLoss: return "NonfiniteLoss";
        case ErrorCode::CorruptModelFile: return "CorruptModelFile";
        case ErrorCode::NoValidationData: return "NoValidationData";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::UnknownUser: return "UnknownUser";
        case ErrorCode::NoQuerySamples: return "NoQuerySamples";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::OneClassOnly: return "OneClassOnly";
        case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

std::uint64_t Rng::index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return r % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::exponential(double mean) {
    double u;
    do {
        u = uniform();
    } while (u <= 0.0);
    return -mean * std::log(u);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    return splitmix64(root ^ splitmix64(fnv1a64(label)));
}

}  // namespace mousesim
