#include <morphosys/errors.hpp>
#include <morphosys/placement.hpp>

#include <boost/container/small_vector.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace morphosys {

Rational HostState::allocated_util() const {
    Rational sum = 0;
    for (const auto& r : residents_) sum += utilization(r.active.result);
    return sum;
}

Rational HostState::original_util() const {
    Rational sum = 0;
    for (const auto& r : residents_) sum += utilization(r.request.nominal());
    return sum;
}

std::vector<SlaType> HostState::active_slas() const {
    std::vector<SlaType> out;
    out.reserve(residents_.size());
    for (const auto& r : residents_) out.push_back(r.active.result);
    return out;
}

void HostState::add(Resident r) {
    residents_.push_back(std::move(r));
    refresh();
}

std::optional<Resident> HostState::remove(TaskId id) {
    auto it = std::find_if(residents_.begin(), residents_.end(),
                           [&](const Resident& r) { return r.id == id; });
    if (it == residents_.end()) return std::nullopt;
    Resident out = std::move(*it);
    residents_.erase(it);
    refresh();
    return out;
}

void HostState::refresh() {
    approx_util_ = 0.0;
    approx_orig_ = 0.0;
    for (const auto& r : residents_) {
        approx_util_ += approx_utilization(r.active.result);
        approx_orig_ += approx_utilization(r.request.nominal());
    }
}

namespace {

// below ln 2 every test admits, whatever the period structure
constexpr double kAlwaysAdmit = 0.6931;

} // namespace

bool fits(std::span<const SlaType> resident, double resident_util, const SlaType& extra,
          const AdmissionConfig& adm) {
    const double u = resident_util + approx_utilization(extra);
    if (u > 1.0 + 1e-9) return false;
    if (u <= kAlwaysAdmit) return true;
    if (adm.test == AdmissionTest::Harmonic) {
        boost::container::small_vector<Slots, 32> periods;
        for (const auto& t : resident) periods.push_back(t.t);
        periods.push_back(extra.t);
        std::sort(periods.begin(), periods.end());
        periods.erase(std::unique(periods.begin(), periods.end()), periods.end());
        const auto k = static_cast<std::int64_t>(harmonic_chain_count({periods.data(), periods.size()}));
        const double limit = (k == 1 ? 1.0 : ll_bound(k)) + kBoundTolerance;
        // clear-cut cases only; near the bound the exact path below decides
        if (std::abs(u - limit) > 1e-7) return u <= limit;
    }
    std::vector<SlaType> tasks(resident.begin(), resident.end());
    tasks.push_back(extra);
    try {
        return admissible(tasks, adm.test, adm.exact_cap);
    } catch (const HorizonOverflow&) {
        return false;
    }
}

bool fits(const HostState& host, const SlaType& extra, const AdmissionConfig& adm) {
    const double u = host.approx_util() + approx_utilization(extra);
    if (u > 1.0 + 1e-9) return false;
    if (u <= kAlwaysAdmit) return true;
    const auto slas = host.active_slas();
    return fits(slas, host.approx_util(), extra, adm);
}

const HostState* Cluster::host(HostId id) const {
    auto it = hosts_.find(id);
    return it == hosts_.end() ? nullptr : &it->second;
}

std::optional<HostId> Cluster::host_of(TaskId task) const {
    auto it = where_.find(task);
    if (it == where_.end()) return std::nullopt;
    return it->second;
}

std::vector<Slots> Cluster::periods() const {
    std::vector<Slots> out;
    out.reserve(period_refs_.size());
    for (const auto& [p, n] : period_refs_) out.push_back(p);
    return out;
}

HostId Cluster::open_host() {
    HostId id;
    if (!free_ids_.empty()) {
        id = *free_ids_.begin();
        free_ids_.erase(free_ids_.begin());
    } else {
        id = next_id_++;
    }
    hosts_.emplace(id, HostState(id));
    return id;
}

void Cluster::open_host(HostId id) {
    if (hosts_.contains(id)) throw PreconditionError(fmt::format("host {} is already powered", id));
    if (id >= next_id_) {
        for (HostId gap = next_id_; gap < id; ++gap) free_ids_.insert(gap);
        next_id_ = id + 1;
    } else {
        free_ids_.erase(id);
    }
    hosts_.emplace(id, HostState(id));
}

void Cluster::place(HostId host, Resident r) {
    auto it = hosts_.find(host);
    if (it == hosts_.end()) throw PreconditionError(fmt::format("host {} is not powered", host));
    if (where_.contains(r.id)) throw PreconditionError(fmt::format("task {} already placed", r.id));
    where_[r.id] = host;
    ++period_refs_[r.active.result.t];
    allocated_ += utilization(r.active.result);
    original_ += utilization(r.request.nominal());
    it->second.add(std::move(r));
}

std::optional<Resident> Cluster::remove(TaskId task) {
    auto w = where_.find(task);
    if (w == where_.end()) return std::nullopt;
    auto h = hosts_.find(w->second);
    auto r = h->second.remove(task);
    where_.erase(w);
    auto p = period_refs_.find(r->active.result.t);
    if (--p->second == 0) period_refs_.erase(p);
    allocated_ -= utilization(r->active.result);
    original_ -= utilization(r->request.nominal());
    if (h->second.empty()) {
        free_ids_.insert(h->first);
        hosts_.erase(h);
    }
    return r;
}

std::string_view to_string(FitRule fit) { return fit == FitRule::FirstFit ? "ff" : "bf"; }

FitRule parse_fit_rule(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "ff") return FitRule::FirstFit;
    if (lower == "bf") return FitRule::BestFit;
    throw PreconditionError(fmt::format("unknown fit rule '{}'", name));
}

std::optional<HostId> assign(const Cluster& cluster, const SlaType& sla, FitRule fit,
                             const AdmissionConfig& adm) {
    const HostState* best = nullptr;
    for (const auto& [id, host] : cluster.hosts()) {
        if (fit == FitRule::BestFit && best != nullptr &&
            host.approx_util() < best->approx_util() - 1e-12) {
            continue;
        }
        if (!fits(host, sla, adm)) continue;
        if (fit == FitRule::FirstFit) return id;
        if (best == nullptr) {
            best = &host;
            continue;
        }
        // hosts are visited in ascending id, so only a strictly fuller host wins
        const double diff = host.approx_util() - best->approx_util();
        if (diff > 1e-12 || (diff > -1e-12 && host.allocated_util() > best->allocated_util()))
            best = &host;
    }
    if (best == nullptr) return std::nullopt;
    return best->id();
}

std::string_view to_string(PlacementOutcome outcome) {
    switch (outcome) {
    case PlacementOutcome::Placed: return "placed";
    case PlacementOutcome::PlacedAfterRepack: return "placed_after_repack";
    case PlacementOutcome::NewHost: return "new_host";
    case PlacementOutcome::Rejected: return "rejected";
    }
    return "?";
}

namespace {

std::optional<PlacementDecision> try_existing(Cluster& cluster, TaskId id,
                                              const FluidSla& request,
                                              const WasPolicy& policy, std::size_t& attempts) {
    const BoundedTransform identity = identity_transform(request.nominal());
    ++attempts;
    if (auto h = assign(cluster, identity.result, policy.fit, policy.admission)) {
        cluster.place(*h, {id, request, identity});
        return PlacementDecision{PlacementOutcome::Placed, h, identity, attempts};
    }
    if (!policy.transforms || cluster.host_count() == 0) return std::nullopt;
    const auto context = cluster.periods();
    for (const auto& cand : gen_transforms(request, context, policy.limits)) {
        if (cand.source.kind == TransformKind::Identity) continue;
        ++attempts;
        if (auto h = assign(cluster, cand.result, policy.fit, policy.admission)) {
            cluster.place(*h, {id, request, cand});
            return PlacementDecision{PlacementOutcome::Placed, h, cand, attempts};
        }
    }
    return std::nullopt;
}

} // namespace

PlacementDecision was_admit(Cluster& cluster, TaskId id, const FluidSla& request,
                            const WasPolicy& policy) {
    if (auto v = validate(request)) {
        throw PreconditionError(
            fmt::format("request {} violates {}", to_string(request), v->constraint));
    }
    std::size_t attempts = 0;
    if (auto d = try_existing(cluster, id, request, policy, attempts)) return *d;

    if (policy.forced_repack && cluster.host_count() > 0) {
        if (auto h = policy.forced_repack(cluster, id, request)) {
            auto* host = cluster.host(*h);
            std::optional<BoundedTransform> used;
            for (const auto& r : host->residents())
                if (r.id == id) used = r.active;
            return {PlacementOutcome::PlacedAfterRepack, h, used, attempts};
        }
        if (auto d = try_existing(cluster, id, request, policy, attempts)) return *d;
    }

    const BoundedTransform identity = identity_transform(request.nominal());
    const bool alone_ok = [&] {
        try {
            const std::vector<SlaType> one{identity.result};
            return admissible(one, policy.admission.test, policy.admission.exact_cap);
        } catch (const HorizonOverflow&) {
            return false;
        }
    }();
    if (!alone_ok || (policy.host_cap && cluster.host_count() >= *policy.host_cap)) {
        return {PlacementOutcome::Rejected, std::nullopt, std::nullopt, attempts};
    }
    const HostId h = cluster.open_host();
    cluster.place(h, {id, request, identity});
    return {PlacementOutcome::NewHost, h, identity, attempts};
}

std::optional<std::string> audit(const Cluster& cluster, const AdmissionConfig& adm) {
    Rational total = 0;
    for (const auto& [id, host] : cluster.hosts()) {
        if (host.empty()) return fmt::format("host {} is powered but empty", id);
        const auto slas = host.active_slas();
        bool ok = false;
        try {
            ok = admissible(slas, adm.test, adm.exact_cap);
        } catch (const HorizonOverflow&) {
            ok = false;
        }
        if (!ok) return fmt::format("host {} fails {} admission", id, to_string(adm.test));
        for (const auto& r : host.residents()) {
            if (!certify(r.request, r.active)) {
                return fmt::format("task {} on host {} holds uncertified {} ({})", r.id, id,
                                   to_string(r.active.result), r.active.source.label());
            }
            if (cluster.host_of(r.id) != id) return fmt::format("task {} index is stale", r.id);
        }
        total += host.allocated_util();
    }
    if (total != cluster.allocated_util()) return std::string("cluster utilization drifted");
    return std::nullopt;
}

} // namespace morphosys
