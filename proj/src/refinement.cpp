#include "pdmesh/refinement.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>
#include <unordered_map>

namespace pdmesh {

void RefineConfig::validate() const
{
    if (init_resolution < 2) {
        throw std::invalid_argument("init_resolution must be at least 2");
    }
    if (k_max < 0) {
        throw std::invalid_argument("k_max must be non-negative");
    }
    if (!(eps >= 0.0)) {
        throw std::invalid_argument("eps must be non-negative");
    }
    if (batch_size < 1) {
        throw std::invalid_argument("batch_size must be at least 1");
    }
    if (projection.max_iters < 0 || !(projection.tol > 0.0)) {
        throw std::invalid_argument("projection needs max_iters >= 0 and tol > 0");
    }
}

DeviationResult triangle_deviation(const Point3& a, const Point3& b, const Point3& c, const ScalarField& field)
{
    const Vec3 n = cross(b - a, c - a);
    const double len = norm(n);
    if (!(0.5 * len > 1e-16)) {
        return {0.0, true};
    }
    const Vec3 unit = n / len;
    const double la = distance(b, c), lb = distance(c, a), lc = distance(a, b);
    const Point3 incenter = (a * la + b * lb + c * lc) / (la + lb + lc);
    const Point3* corners[3] = {&a, &b, &c};
    DeviationResult r;
    for (int i = 0; i < 3; ++i) {
        const Point3& p = *corners[i];
        const Point3& q = *corners[(i + 1) % 3];
        const double area = 0.5 * norm(cross(p - incenter, q - incenter));
        const Vec3 g = field.eval((incenter + p + q) / 3.0).gradient;
        r.delta += area * norm(g - unit * dot(g, unit));
    }
    return r;
}

double patch_deviation(const Point3* corners, int size, const ScalarField& field)
{
    double d = 0.0;
    for (const auto& t : split_polygon(corners, size)) {
        d += triangle_deviation(corners[t[0]], corners[t[1]], corners[t[2]], field).delta;
    }
    return d;
}

void RunStats::write_csv(std::ostream& out, bool timing) const
{
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << "iter,inserted,delta,queries,cavity,ms\n" << std::setprecision(17);
    for (const auto& s : steps) {
        out << s.iter << ',' << s.inserted << ',' << s.delta << ',' << s.queries << ',' << s.cavity << ','
            << (timing ? s.ms : 0.0) << '\n';
    }
    out.flags(flags);
    out.precision(prec);
}

std::string_view to_string(SkipReason r)
{
    switch (r) {
    case SkipReason::None: return "none";
    case SkipReason::OutsideDomain: return "outside-domain";
    case SkipReason::IllConditioned: return "ill-conditioned";
    case SkipReason::NotConverged: return "not-converged";
    case SkipReason::Duplicate: return "duplicate";
    case SkipReason::Hidden: return "hidden";
    }
    return "?";
}

namespace {

Tetrahedralization bootstrap(const ScalarField& field, const RefineConfig& cfg)
{
    cfg.validate();
    std::array<FieldSample, 8> corners;
    for (int i = 0; i < 8; ++i) {
        corners[i] = field.eval(cfg.domain.corner(i));
    }
    return Tetrahedralization::init_domain(cfg.domain, corners, cfg.allow_open_boundary);
}

SiteClass projection_of(double sample_value)
{
    return sample_value < 0.0 ? SiteClass::ProjOfNeg : SiteClass::ProjOfPos;
}

bool is_mixed(const Tetrahedralization& t, const Tet& tet)
{
    const Category c0 = category(t.site(tet.v[0]).site_class);
    for (int i = 1; i < 4; ++i) {
        if (category(t.site(tet.v[i]).site_class) != c0) {
            return true;
        }
    }
    return false;
}

} // namespace

Refiner::Refiner(const ScalarField& field, RefineConfig cfg)
    : field_(field), cfg_(std::move(cfg)), query_base_(field.query_count()), tri_(bootstrap(field, cfg_))
{
    initialize();
}

InsertionResult Refiner::add_site(const Point3& p, double value, SiteClass c, TetId hint)
{
    return tri_.insert(p, value * value, value, c, hint);
}

void Refiner::initialize()
{
    const int n = cfg_.init_resolution;
    const Vec3 step = cfg_.model_box.extent() / static_cast<double>(n - 1);
    const double band = cfg_.surface_band();
    const double margin = tri_.merge_tolerance();
    TetId hint = kOutside;
    auto remember = [&](const InsertionResult& r) {
        if (!r.created.empty()) {
            hint = r.created.back();
        }
    };
    std::size_t dropped = 0;
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const Point3 g{cfg_.model_box.lo.x + i * step.x, cfg_.model_box.lo.y + j * step.y,
                               cfg_.model_box.lo.z + k * step.z};
                ProjectionResult pr;
                try {
                    pr = project_to_surface(field_, g, cfg_.projection);
                } catch (const std::out_of_range&) {
                    pr.converged = false;
                    pr.start_value = field_.eval(g).value;
                }
                const double v = pr.start_value;
                const SiteClass cls = classify_site(v, false, Sign::Zero, band);
                if (!is_projection(cls)) {
                    remember(add_site(g, v, cls, hint));
                }
                if (pr.converged && cfg_.domain.contains_strictly(pr.point, margin)) {
                    remember(add_site(pr.point, pr.value, projection_of(v), hint));
                } else {
                    ++dropped;
                }
            }
        }
    }
    if (dropped > 0) {
        spdlog::info("initial grid: {} projections dropped (not converged or outside the domain)", dropped);
    }

    std::vector<TetId> live;
    for (TetId id = 0; id < static_cast<TetId>(tri_.tets().size()); ++id) {
        if (tri_.is_live(id)) {
            live.push_back(id);
        }
    }
    score_and_push(std::move(live));
    if (heap_.empty()) {
        throw SurfaceNotDetected("surface not detected; increase init_resolution");
    }
    stats_.initial_sites = tri_.sites().size();
    stats_.initial_queries = field_.query_count() - query_base_;
}

bool Refiner::is_fresh(const HeapEntry& e) const
{
    return tri_.is_live(e.tet) && tri_.tet(e.tet).generation == e.generation;
}

std::optional<HeapEntry> Refiner::pop_fresh()
{
    while (!heap_.empty()) {
        std::pop_heap(heap_.begin(), heap_.end(), heap_less);
        const HeapEntry e = heap_.back();
        heap_.pop_back();
        if (is_fresh(e)) {
            return e;
        }
    }
    return std::nullopt;
}

std::optional<HeapEntry> Refiner::peek()
{
    auto e = pop_fresh();
    if (e) {
        heap_.push_back(*e);
        std::push_heap(heap_.begin(), heap_.end(), heap_less);
    }
    return e;
}

void Refiner::score_and_push(std::vector<TetId> tets)
{
    std::sort(tets.begin(), tets.end());
    tets.erase(std::unique(tets.begin(), tets.end()), tets.end());
    struct Job {
        TetId tet;
        std::vector<Point3> polygon;
        double delta = 0.0;
    };
    std::vector<Job> jobs;
    for (TetId id : tets) {
        if (tri_.is_live(id) && is_mixed(tri_, tri_.tet(id))) {
            jobs.push_back({id, patch_polygon(tri_, id)});
        }
    }
    auto score = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            jobs[i].delta = patch_deviation(jobs[i].polygon.data(), static_cast<int>(jobs[i].polygon.size()), field_);
        }
    };
    const std::size_t workers = cfg_.batch_size > 1
                                    ? std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), jobs.size())
                                    : 1;
    if (workers > 1) {
        std::vector<std::thread> pool;
        const std::size_t chunk = (jobs.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk, hi = std::min(jobs.size(), lo + chunk);
            if (lo < hi) {
                pool.emplace_back(score, lo, hi);
            }
        }
        for (auto& t : pool) {
            t.join();
        }
    } else {
        score(0, jobs.size());
    }
    for (const auto& j : jobs) {
        heap_.push_back({j.tet, tri_.tet(j.tet).generation, j.delta});
        std::push_heap(heap_.begin(), heap_.end(), heap_less);
    }
}

StepOutcome Refiner::process(const HeapEntry& e)
{
    StepOutcome out;
    out.kind = StepOutcome::Kind::Skipped;
    out.tet = e.tet;
    out.delta = e.delta;

    const Orthosphere o = orthocenter(tri_.weighted_tet(e.tet));
    const double margin = tri_.merge_tolerance();
    if (o.ill_conditioned) {
        out.reason = SkipReason::IllConditioned;
        return out;
    }
    if (!is_finite(o.center) || !cfg_.domain.contains_strictly(o.center, margin)) {
        out.reason = SkipReason::OutsideDomain;
        return out;
    }
    ProjectionResult pr;
    try {
        pr = project_to_surface(field_, o.center, cfg_.projection);
    } catch (const std::out_of_range&) {
        pr.converged = false;
    }
    if (!pr.converged) {
        out.reason = SkipReason::NotConverged;
        return out;
    }
    if (!cfg_.domain.contains_strictly(pr.point, margin)) {
        out.reason = SkipReason::OutsideDomain;
        return out;
    }

    const double v = pr.start_value;
    // The orthocenter is classified by sign alone. Letting near-surface
    // orthocenters collapse to a lone projection site punches handles into the
    // surface (seen on the torus), so the band only applies to initial samples.
    const SiteClass cls = classify_site(v, false, Sign::Zero, 0.0);
    std::vector<InsertionResult> results;
    if (!is_projection(cls)) {
        auto r = add_site(o.center, v, cls, e.tet);
        if (r.status == InsertStatus::Duplicate) {
            out.reason = SkipReason::Duplicate;
            return out;
        }
        results.push_back(std::move(r));
    }
    TetId hint = e.tet;
    if (!results.empty() && !results.back().created.empty()) {
        hint = results.back().created.front();
    }
    auto rq = add_site(pr.point, pr.value, projection_of(v), hint);
    if (rq.status == InsertStatus::Duplicate && results.empty()) {
        out.reason = SkipReason::Duplicate;
        return out;
    }
    results.push_back(std::move(rq));

    out.kind = StepOutcome::Kind::Inserted;
    std::vector<TetId> created;
    bool any_structural = false;
    for (const auto& r : results) {
        if (r.status == InsertStatus::Duplicate) {
            continue;
        }
        ++out.sites_added;
        out.cavity += r.destroyed.size();
        any_structural = any_structural || r.status == InsertStatus::Inserted;
        created.insert(created.end(), r.created.begin(), r.created.end());
    }
    if (!any_structural) {
        out.reason = SkipReason::Hidden;
    }
    inserted_ += out.sites_added;
    score_and_push(std::move(created));
    return out;
}

StepOutcome Refiner::step()
{
    StepOutcome out;
    if (finished_) {
        out.kind = StepOutcome::Kind::Exhausted;
        return out;
    }
    if (inserted_ >= cfg_.k_max) {
        finished_ = true;
        out.kind = StepOutcome::Kind::BudgetReached;
        return out;
    }
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<HeapEntry> batch;
    while (static_cast<int>(batch.size()) < cfg_.batch_size) {
        auto e = pop_fresh();
        if (!e) {
            break;
        }
        if (batch.empty() && e->delta < cfg_.eps) {
            heap_.push_back(*e);
            std::push_heap(heap_.begin(), heap_.end(), heap_less);
            finished_ = true;
            out.kind = StepOutcome::Kind::Converged;
            out.delta = e->delta;
            last_delta_ = e->delta;
            return out;
        }
        batch.push_back(*e);
    }
    if (batch.empty()) {
        finished_ = true;
        out.kind = StepOutcome::Kind::Exhausted;
        return out;
    }

    out.kind = StepOutcome::Kind::Skipped;
    out.tet = batch.front().tet;
    out.delta = batch.front().delta;
    last_delta_ = out.delta;
    std::size_t next = 0;
    for (; next < batch.size(); ++next) {
        const HeapEntry& e = batch[next];
        if (inserted_ >= cfg_.k_max) {
            break;
        }
        if (!is_fresh(e)) {
            // Destroyed by an earlier entry of this batch.
            continue;
        }
        const StepOutcome r = process(e);
        if (r.kind == StepOutcome::Kind::Inserted) {
            out.kind = StepOutcome::Kind::Inserted;
        } else {
            ++stats_.skipped;
            spdlog::debug("skip tet {} (delta {}): {}", e.tet, e.delta, to_string(r.reason));
        }
        out.reason = r.reason;
        out.sites_added += r.sites_added;
        out.cavity += r.cavity;
        if (is_fresh(e)) {
            parked_.push_back(e);
        }
    }
    // Entries the budget cut off go back into the queue.
    for (; next < batch.size(); ++next) {
        if (is_fresh(batch[next])) {
            heap_.push_back(batch[next]);
            std::push_heap(heap_.begin(), heap_.end(), heap_less);
        }
    }

    StepRecord rec;
    rec.iter = ++iter_;
    rec.inserted = inserted_;
    rec.delta = out.delta;
    rec.queries = field_.query_count() - query_base_;
    rec.cavity = out.cavity;
    rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    stats_.steps.push_back(rec);
    return out;
}

void Refiner::run_to_completion()
{
    while (!finished_) {
        step();
    }
}

HeapAudit Refiner::audit_heap() const
{
    HeapAudit a;
    std::unordered_map<TetId, int> fresh;
    auto tally = [&](const std::vector<HeapEntry>& entries, std::size_t& counter) {
        for (const auto& e : entries) {
            if (is_fresh(e)) {
                ++counter;
                ++fresh[e.tet];
            } else {
                ++a.stale;
            }
        }
    };
    tally(heap_, a.fresh_queued);
    tally(parked_, a.fresh_parked);
    for (TetId id = 0; id < static_cast<TetId>(tri_.tets().size()); ++id) {
        if (!tri_.is_live(id) || !is_mixed(tri_, tri_.tet(id))) {
            continue;
        }
        ++a.live_mixed;
        auto it = fresh.find(id);
        if (it == fresh.end()) {
            ++a.missing;
        } else if (it->second > 1) {
            ++a.duplicated;
        }
    }
    return a;
}

RunResult run(const ScalarField& field, const RefineConfig& cfg)
{
    Refiner r(field, cfg);
    r.run_to_completion();
    RunResult out;
    out.mesh = r.extract();
    out.stats = r.stats();
    out.inserted = r.inserted();
    out.last_delta = r.last_delta();
    out.sites = r.triangulation().sites().size();
    return out;
}

} // namespace pdmesh
