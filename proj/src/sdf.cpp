#include "pdmesh/sdf.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <variant>

namespace pdmesh {

namespace {

struct Sphere {
    Point3 center;
    double radius;
};

struct BoxShape {
    Point3 center;
    Vec3 half;
};

struct Torus {
    Point3 center;
    double major;
    double minor;
};

struct Plane {
    Vec3 normal; // unit
    double offset;
};

enum class CsgOp { Union, Intersection, Difference };

FieldSample eval_sphere(const Sphere& s, const Point3& p)
{
    const Vec3 d = p - s.center;
    const double len = norm(d);
    return {len - s.radius, len > 0.0 ? d / len : Vec3{}};
}

double sign_or_one(double v) { return v < 0.0 ? -1.0 : 1.0; }

FieldSample eval_box(const BoxShape& b, const Point3& p)
{
    const Vec3 d = p - b.center;
    const double q[3] = {std::abs(d.x) - b.half.x, std::abs(d.y) - b.half.y, std::abs(d.z) - b.half.z};
    const double s[3] = {sign_or_one(d.x), sign_or_one(d.y), sign_or_one(d.z)};
    const Vec3 outside{std::max(q[0], 0.0), std::max(q[1], 0.0), std::max(q[2], 0.0)};
    const double out_len = norm(outside);
    if (out_len > 0.0) {
        return {out_len, Vec3{s[0] * outside.x, s[1] * outside.y, s[2] * outside.z} / out_len};
    }
    int axis = 0;
    for (int i = 1; i < 3; ++i) {
        if (q[i] > q[axis]) {
            axis = i;
        }
    }
    Vec3 g{};
    (axis == 0 ? g.x : (axis == 1 ? g.y : g.z)) = s[axis];
    return {q[axis], g};
}

FieldSample eval_torus(const Torus& t, const Point3& p)
{
    const Vec3 d = p - t.center;
    const double rho = std::hypot(d.x, d.y);
    const double a = rho - t.major;
    const double len = std::hypot(a, d.z);
    if (len == 0.0) {
        return {-t.minor, Vec3{}};
    }
    const double cx = rho > 0.0 ? d.x / rho : 1.0;
    const double cy = rho > 0.0 ? d.y / rho : 0.0;
    return {len - t.minor, Vec3{a / len * cx, a / len * cy, d.z / len}};
}

FieldSample eval_plane(const Plane& pl, const Point3& p) { return {dot(pl.normal, p) - pl.offset, pl.normal}; }

std::vector<double> parse_numbers(std::string_view text, std::string_view what)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string_view tok = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
            throw FieldSpecError("malformed number '" + std::string(tok) + "' in " + std::string(what));
        }
        out.push_back(v);
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return out;
}

// Splits on ';' at parenthesis depth zero.
std::vector<std::string_view> split_operands(std::string_view text)
{
    std::vector<std::string_view> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') {
            ++depth;
        } else if (text[i] == ')') {
            if (--depth < 0) {
                throw FieldSpecError("unbalanced parentheses in field spec");
            }
        } else if (text[i] == ';' && depth == 0) {
            out.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    if (depth != 0) {
        throw FieldSpecError("unbalanced parentheses in field spec");
    }
    out.push_back(text.substr(start));
    return out;
}

} // namespace

struct AnalyticField::Node {
    struct Csg {
        CsgOp op;
        std::vector<Node> children;
    };
    std::variant<Sphere, BoxShape, Torus, Plane, Csg> shape;

    FieldSample eval(const Point3& p) const
    {
        return std::visit(
            [&](const auto& s) -> FieldSample {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Sphere>) {
                    return eval_sphere(s, p);
                } else if constexpr (std::is_same_v<T, BoxShape>) {
                    return eval_box(s, p);
                } else if constexpr (std::is_same_v<T, Torus>) {
                    return eval_torus(s, p);
                } else if constexpr (std::is_same_v<T, Plane>) {
                    return eval_plane(s, p);
                } else {
                    return eval_csg(s, p);
                }
            },
            shape);
    }

    static FieldSample eval_csg(const Csg& c, const Point3& p)
    {
        FieldSample best = c.children.front().eval(p);
        for (std::size_t i = 1; i < c.children.size(); ++i) {
            FieldSample s = c.children[i].eval(p);
            switch (c.op) {
            case CsgOp::Union:
                if (s.value < best.value) {
                    best = s;
                }
                break;
            case CsgOp::Intersection:
                if (s.value > best.value) {
                    best = s;
                }
                break;
            case CsgOp::Difference:
                s.value = -s.value;
                s.gradient = -s.gradient;
                if (s.value > best.value) {
                    best = s;
                }
                break;
            }
        }
        return best;
    }

    static Node parse(std::string_view text)
    {
        for (const auto& [name, op] : {std::pair{std::string_view("union"), CsgOp::Union},
                                       std::pair{std::string_view("intersection"), CsgOp::Intersection},
                                       std::pair{std::string_view("difference"), CsgOp::Difference}}) {
            if (text.starts_with(name) && text.size() > name.size() && text[name.size()] == '(') {
                if (text.back() != ')') {
                    throw FieldSpecError("CSG spec must end with ')': " + std::string(text));
                }
                const auto inner = text.substr(name.size() + 1, text.size() - name.size() - 2);
                Csg csg{op, {}};
                for (auto operand : split_operands(inner)) {
                    csg.children.push_back(parse(operand));
                }
                if (csg.children.size() < 2 || (op == CsgOp::Difference && csg.children.size() != 2)) {
                    throw FieldSpecError("wrong operand count in " + std::string(text));
                }
                return Node{std::move(csg)};
            }
        }

        const std::size_t colon = text.find(':');
        if (colon == std::string_view::npos) {
            throw FieldSpecError("field spec needs 'kind:params': " + std::string(text));
        }
        const std::string_view kind = text.substr(0, colon);
        const auto v = parse_numbers(text.substr(colon + 1), text);
        auto center_at = [&](std::size_t i) { return v.size() > i ? Point3{v[i], v[i + 1], v[i + 2]} : Point3{}; };

        if (kind == "sphere") {
            if ((v.size() != 1 && v.size() != 4) || v[0] <= 0.0) {
                throw FieldSpecError("sphere expects r[,cx,cy,cz] with r > 0");
            }
            return Node{Sphere{center_at(1), v[0]}};
        }
        if (kind == "box") {
            if ((v.size() != 3 && v.size() != 6) || v[0] <= 0.0 || v[1] <= 0.0 || v[2] <= 0.0) {
                throw FieldSpecError("box expects hx,hy,hz[,cx,cy,cz] with positive half extents");
            }
            return Node{BoxShape{center_at(3), Vec3{v[0], v[1], v[2]}}};
        }
        if (kind == "torus") {
            if ((v.size() != 2 && v.size() != 5) || v[1] <= 0.0 || v[0] <= v[1]) {
                throw FieldSpecError("torus expects R,r[,cx,cy,cz] with R > r > 0");
            }
            return Node{Torus{center_at(2), v[0], v[1]}};
        }
        if (kind == "plane") {
            if (v.size() != 3 && v.size() != 4) {
                throw FieldSpecError("plane expects nx,ny,nz[,offset]");
            }
            const Vec3 n{v[0], v[1], v[2]};
            const double len = norm(n);
            if (len == 0.0) {
                throw FieldSpecError("plane normal must be non-zero");
            }
            return Node{Plane{n / len, v.size() == 4 ? v[3] : 0.0}};
        }
        throw FieldSpecError("unknown field kind '" + std::string(kind) + "'");
    }
};

AnalyticField::AnalyticField(std::string_view spec)
    : spec_(spec), root_(std::make_unique<Node>(Node::parse(spec)))
{}

AnalyticField::~AnalyticField() = default;
AnalyticField::AnalyticField(AnalyticField&&) noexcept = default;
AnalyticField& AnalyticField::operator=(AnalyticField&&) noexcept = default;

FieldSample AnalyticField::evaluate(const Point3& p) const { return root_->eval(p); }

std::unique_ptr<AnalyticField> analytic_field(std::string_view spec) { return std::make_unique<AnalyticField>(spec); }

GridField::GridField(std::array<std::uint32_t, 3> dims, Point3 origin, double spacing, std::vector<double> values)
    : dims_(dims), origin_(origin), spacing_(spacing), values_(std::move(values))
{
    if (dims_[0] < 2 || dims_[1] < 2 || dims_[2] < 2) {
        throw std::invalid_argument("grid dims must be at least 2 per axis");
    }
    if (!(spacing_ > 0.0) || !std::isfinite(spacing_) || !is_finite(origin_)) {
        throw std::invalid_argument("grid spacing must be positive and origin finite");
    }
    if (values_.size() != static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]) {
        throw std::invalid_argument("grid value count does not match dims");
    }
    if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
        throw std::invalid_argument("grid values must be finite");
    }
}

Box3 GridField::valid_box() const
{
    const Vec3 cell{spacing_, spacing_, spacing_};
    const Point3 far{origin_.x + (dims_[0] - 1) * spacing_, origin_.y + (dims_[1] - 1) * spacing_,
                     origin_.z + (dims_[2] - 1) * spacing_};
    return {origin_ + cell, far - cell};
}

double GridField::interpolate(const Point3& p) const
{
    double t[3];
    std::uint32_t base[3];
    for (int a = 0; a < 3; ++a) {
        const double u = (p[a] - origin_[a]) / spacing_;
        const double cell = std::clamp(std::floor(u), 0.0, static_cast<double>(dims_[a] - 2));
        base[a] = static_cast<std::uint32_t>(cell);
        t[a] = u - cell;
    }
    double acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
        const double w = (di ? t[0] : 1.0 - t[0]) * (dj ? t[1] : 1.0 - t[1]) * (dk ? t[2] : 1.0 - t[2]);
        acc += w * at(base[0] + di, base[1] + dj, base[2] + dk);
    }
    return acc;
}

FieldSample GridField::evaluate(const Point3& p) const
{
    // Slack absorbs f32 rounding of origin/spacing so the domain corners stay valid.
    const Box3 box = valid_box();
    const double reach = std::max({std::abs(origin_.x), std::abs(origin_.y), std::abs(origin_.z)}) +
                         std::max({dims_[0], dims_[1], dims_[2]}) * spacing_;
    const double slack = 8.0 * std::numeric_limits<float>::epsilon() * reach;
    if (!is_finite(p) || p.x < box.lo.x - slack || p.y < box.lo.y - slack || p.z < box.lo.z - slack ||
        p.x > box.hi.x + slack || p.y > box.hi.y + slack || p.z > box.hi.z + slack) {
        throw std::out_of_range("grid field evaluated outside its valid box");
    }
    const double h = spacing_ / 2.0;
    FieldSample s;
    s.value = interpolate(p);
    s.gradient = {(interpolate(p + Vec3{h, 0, 0}) - interpolate(p - Vec3{h, 0, 0})) / (2 * h),
                  (interpolate(p + Vec3{0, h, 0}) - interpolate(p - Vec3{0, h, 0})) / (2 * h),
                  (interpolate(p + Vec3{0, 0, h}) - interpolate(p - Vec3{0, 0, h})) / (2 * h)};
    return s;
}

GridField sample_grid(const ScalarField& field, std::array<std::uint32_t, 3> dims, Point3 origin, double spacing)
{
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    for (std::uint32_t k = 0; k < dims[2]; ++k) {
        for (std::uint32_t j = 0; j < dims[1]; ++j) {
            for (std::uint32_t i = 0; i < dims[0]; ++i) {
                values.push_back(field.eval({origin.x + i * spacing, origin.y + j * spacing, origin.z + k * spacing}).value);
            }
        }
    }
    return GridField(dims, origin, spacing, std::move(values));
}

namespace {

constexpr char kSdfgMagic[4] = {'S', 'D', 'F', 'G'};

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
}

void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(const std::string& in, std::size_t& pos)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
}

float get_f32(const std::string& in, std::size_t& pos) { return std::bit_cast<float>(get_u32(in, pos)); }

} // namespace

void write_sdfg(const std::filesystem::path& path, const GridField& grid)
{
    std::string buf(kSdfgMagic, 4);
    for (auto d : grid.dims()) {
        put_u32(buf, d);
    }
    put_f32(buf, grid.origin().x);
    put_f32(buf, grid.origin().y);
    put_f32(buf, grid.origin().z);
    put_f32(buf, grid.spacing());
    for (double v : grid.values()) {
        put_f32(buf, v);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

GridField read_sdfg(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    constexpr std::size_t header = 4 + 3 * 4 + 4 * 4;
    if (in.size() < header || std::memcmp(in.data(), kSdfgMagic, 4) != 0) {
        throw std::runtime_error("'" + path.string() + "' is not an SDFG file");
    }
    std::size_t pos = 4;
    std::array<std::uint32_t, 3> dims{};
    for (auto& d : dims) {
        d = get_u32(in, pos);
    }
    Point3 origin;
    origin.x = get_f32(in, pos);
    origin.y = get_f32(in, pos);
    origin.z = get_f32(in, pos);
    const double spacing = get_f32(in, pos);
    const std::uint64_t count = static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
    if (in.size() != header + 4 * count) {
        throw std::runtime_error("SDFG size mismatch in '" + path.string() + "'");
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        v = get_f32(in, pos);
    }
    return GridField(dims, origin, spacing, std::move(values));
}

std::unique_ptr<ScalarField> load_field(std::string_view spec)
{
    if (spec.starts_with("grid:")) {
        return std::make_unique<GridField>(read_sdfg(std::filesystem::path(std::string(spec.substr(5)))));
    }
    return analytic_field(spec);
}

ProjectionResult project_to_surface(const ScalarField& field, const Point3& p, const ProjectionConfig& cfg)
{
    if (!is_finite(p)) {
        throw std::invalid_argument("projection start point is not finite");
    }
    ProjectionResult r;
    r.point = p;
    for (int it = 0;; ++it) {
        const FieldSample s = field.eval(r.point);
        r.value = s.value;
        r.iterations = it;
        if (it == 0) {
            r.start_value = s.value;
        }
        if (std::abs(s.value) <= cfg.tol) {
            r.converged = true;
            return r;
        }
        if (it >= cfg.max_iters) {
            return r;
        }
        const double g = norm(s.gradient);
        if (!(g >= 1e-12) || !std::isfinite(s.value)) {
            return r;
        }
        r.point -= s.gradient * (s.value / g);
    }
}

} // namespace pdmesh
