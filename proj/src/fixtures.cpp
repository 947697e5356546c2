#include "gausstest/fixtures.hpp"

#include <algorithm>
#include <charconv>
#include <vector>

#include "gausstest/error.hpp"

namespace gausstest {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(const std::string& spec, const std::string& text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw InvalidArgument("fixture '" + spec + "': '" + text + "' is not a number");
    return v;
}

int parse_int(const std::string& spec, const std::string& text) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || v < 0)
        throw InvalidArgument("fixture '" + spec + "': '" + text + "' is not a non-negative integer");
    return v;
}

Fixture gaussian_fixture(const std::string& spec, GaussianState g, std::optional<int> cutoff, double bound) {
    int d = cutoff ? *cutoff : std::max(4, minimal_cutoff(g, 1e-12));
    FockState st = gaussian_state_to_fock(g, d, Purity::automatic, bound);
    return Fixture{spec, std::move(st), std::move(g)};
}

}  // namespace

bool is_named_fixture(const std::string& spec) {
    const std::string head = spec.substr(0, spec.find(':'));
    return head == "vacuum" || head == "fock" || head == "thermal" || head == "squeezed" || head == "coherent";
}

Fixture make_fixture(const std::string& spec, std::optional<int> cutoff, double leakage_bound) {
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (cutoff && *cutoff < 2) throw InvalidArgument("cutoff must be >= 2");

    if (head == "vacuum") {
        if (!arg.empty()) throw InvalidArgument("fixture 'vacuum' takes no argument");
        return gaussian_fixture(spec, GaussianState::vacuum(1), cutoff, leakage_bound);
    }
    if (arg.empty()) throw InvalidArgument("fixture '" + spec + "' needs an argument");
    if (head == "fock") {
        FockIndex k;
        for (const auto& part : split(arg, ',')) k.push_back(parse_int(spec, part));
        const int top = *std::max_element(k.begin(), k.end());
        const int d = cutoff ? *cutoff : top + 4;
        if (top >= d) throw InvalidArgument("fixture '" + spec + "' does not fit below cutoff " + std::to_string(d));
        return Fixture{spec, PureFockState::basis(static_cast<int>(k.size()), d, k), std::nullopt};
    }
    if (head == "thermal") {
        const double nbar = parse_number(spec, arg);
        if (nbar < 0) throw InvalidArgument("fixture '" + spec + "': mean photon number must be >= 0");
        return gaussian_fixture(spec, GaussianState::thermal(1, nbar), cutoff, leakage_bound);
    }
    if (head == "squeezed") {
        return gaussian_fixture(spec, GaussianState::squeezed(parse_number(spec, arg)), cutoff, leakage_bound);
    }
    if (head == "coherent") {
        auto parts = split(arg, ',');
        if (parts.size() > 2) throw InvalidArgument("fixture '" + spec + "': expected coherent:re[,im]");
        Complex alpha(parse_number(spec, parts[0]), parts.size() == 2 ? parse_number(spec, parts[1]) : 0.0);
        return gaussian_fixture(spec, GaussianState::coherent(alpha), cutoff, leakage_bound);
    }
    throw InvalidArgument("unknown fixture '" + spec + "'");
}

}  // namespace gausstest
