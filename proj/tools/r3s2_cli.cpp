// r3s2: command-line front end for the orientation-field evolutions, kernels, geodesics and walks.
//
// Exit codes: 0 success, 1 malformed arguments or parameters, 2 I/O or format error,
// 3 numerical failure (unstable step, curvature blow-up, kernel window too small).

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include "r3s2/r3s2.hpp"

using namespace r3s2;

namespace {

enum Exit { kOk = 0, kArgs = 1, kIo = 2, kNumeric = 3 };

const std::map<std::string, Boundary> kBoundaries{
    {"reflecting", Boundary::reflecting}, {"periodic", Boundary::periodic}, {"zero", Boundary::zero}};
const std::map<std::string, AngularScheme> kAngular{
    {"cotangent", AngularScheme::cotangent}, {"interpolated", AngularScheme::interpolated}};

struct KernelOpts {
    std::string kind = "enhancement";
    double t = 1, D11 = 1, D33 = 1, D44 = 0.04;
    double lambda = 0.1, c = 1, eta = 1;
    int k = 1, average = 0;
};

void add_kernel_options(CLI::App* s, KernelOpts& o) {
    s->add_option("--kind", o.kind, "enhancement, gaussian, kresolvent or morph")
        ->check(CLI::IsMember({"enhancement", "gaussian", "kresolvent", "morph"}))
        ->capture_default_str();
    s->add_option("--t", o.t, "stopping time")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--d11", o.D11, "spatial isotropic weight (morph)")->check(CLI::NonNegativeNumber)->capture_default_str();
    s->add_option("--d33", o.D33)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--d44", o.D44)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--lambda", o.lambda, "kresolvent decay")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--k", o.k, "kresolvent step count")->check(CLI::Range(1, 64))->capture_default_str();
    s->add_option("--c", o.c, "SE(2) estimate constant")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--eta", o.eta, "morph kernel exponent")->check(CLI::Range(0.5, 1e9))->capture_default_str();
    s->add_option("--alpha-average", o.average, "average over N rotations about e_z (0 = off)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
}

KernelFn make_kernel(const KernelOpts& o) {
    KernelFn p;
    if (o.kind == "enhancement")
        p = [o](const Vec3& y, const Vec3& n) { return enhancement_kernel(y, n, o.t, o.D33, o.D44, o.c); };
    else if (o.kind == "gaussian")
        p = [o](const Vec3& y, const Vec3& n) { return gaussian_estimate_kernel(y, n, o.t, o.D33, o.D44); };
    else if (o.kind == "kresolvent")
        p = [o](const Vec3& y, const Vec3& n) { return kresolvent_kernel(y, n, o.lambda, o.k, o.D44); };
    else {
        MorphParams m;
        m.D11 = o.D11;
        m.D44 = o.D44;
        m.eta = o.eta;
        p = [o, m](const Vec3& y, const Vec3& n) { return morph_kernel(y, n, o.t, m); };
    }
    return o.average > 0 ? alpha_average(std::move(p), o.average) : p;
}

/// Every option of the subcommand with its effective value, next to the output.
void write_manifest(const std::string& out, const CLI::App& sub) {
    nlohmann::ordered_json j;
    j["command"] = sub.get_name();
    j["threads"] = thread_count();
    auto& opts = j["options"];
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_name() == "--help") continue;
        const std::string name = opt->get_name(false, true);
        if (opt->get_type_size() == 0) {
            opts[name] = opt->count() > 0;
            continue;
        }
        const auto& r = opt->results();
        if (r.empty())
            opts[name] = opt->get_default_str();
        else if (r.size() == 1)
            opts[name] = r[0];
        else
            opts[name] = r;
    }
    std::ofstream f(out + ".manifest.json");
    if (!f) throw FormatError("cannot write manifest for " + out);
    f << j.dump(2) << '\n';
}

void write_or_throw(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    body(f);
    if (!f) throw FormatError("write to " + path + " failed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evolutions of orientation fields on R3 x S2"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker count (0 = available parallelism)")->envname("R3S2_THREADS");

    std::string in, out;
    DiffusionParams dp;
    MorphParams mp;
    KernelOpts ko;
    AngularScheme angular = AngularScheme::cotangent;

    auto add_in = [&](CLI::App* s) { s->add_option("input", in, "input field")->required(); };
    auto add_out = [&](CLI::App* s) { s->add_option("output", out, "output path")->required(); };
    std::map<const CLI::App*, Boundary> boundaries;
    auto add_boundary = [&](CLI::App* s, Boundary def) {
        boundaries[s] = def;
        s->add_option("--boundary", boundaries[s], "reflecting, periodic or zero")
            ->transform(CLI::CheckedTransformer(kBoundaries, CLI::ignore_case))
            ->default_str(def == Boundary::periodic ? "periodic" : "reflecting");
    };
    auto add_time = [](CLI::App* s, double& t, double& dt) {
        s->add_option("--t", t, "stopping time")->required()->check(CLI::NonNegativeNumber);
        s->add_option("--dt", dt, "time step (0 = 0.9 x stability bound)")->check(CLI::NonNegativeNumber)->capture_default_str();
    };
    auto add_coef = [](CLI::App* s, const char* name, double& v) {
        s->add_option(name, v)->check(CLI::NonNegativeNumber)->capture_default_str();
    };

    // info
    CLI::App* info = app.add_subcommand("info", "print dims, directions, spacing and range");
    add_in(info);

    // diffuse
    CLI::App* diffuse = app.add_subcommand("diffuse", "contour enhancement (linear or Perona-Malik)");
    add_in(diffuse);
    add_out(diffuse);
    add_coef(diffuse, "--d11", dp.D11);
    add_coef(diffuse, "--d33", dp.D33);
    add_coef(diffuse, "--d44", dp.D44);
    add_time(diffuse, dp.t, dp.dt);
    diffuse->add_option("--K", dp.K, "Perona-Malik contrast (0 = linear)")->check(CLI::NonNegativeNumber)->capture_default_str();
    diffuse->add_option("--angular", angular, "cotangent or interpolated")
        ->transform(CLI::CheckedTransformer(kAngular, CLI::ignore_case))
        ->default_str("cotangent");
    add_boundary(diffuse, Boundary::reflecting);

    // complete
    CLI::App* complete = app.add_subcommand("complete", "contour completion (time evolution or resolvent)");
    double lambda = 0;
    int ksteps = 1;
    bool gamma = false;
    add_in(complete);
    add_out(complete);
    dp.a3 = 1;
    complete->add_option("--a3", dp.a3, "convection along the fibre")->check(CLI::PositiveNumber)->capture_default_str();
    add_coef(complete, "--d44", dp.D44);
    complete->add_option("--t", dp.t, "stopping time (ignored with --lambda)")->check(CLI::NonNegativeNumber);
    complete->add_option("--dt", dp.dt, "time step (0 = 0.9 x stability bound)")->check(CLI::NonNegativeNumber);
    complete->add_option("--lambda", lambda, "resolvent decay; selects the k-step resolvent")->check(CLI::PositiveNumber);
    complete->add_option("--k", ksteps, "resolvent steps")->check(CLI::Range(1, 64))->capture_default_str();
    complete->add_flag("--gamma", gamma, "single Gamma(k, lambda) weighted trajectory instead of k resolvent steps");
    add_boundary(complete, Boundary::reflecting);

    // erode / dilate
    bool adaptive = false;
    CLI::App* erode = app.add_subcommand("erode", "morphological erosion");
    CLI::App* dilate = app.add_subcommand("dilate", "morphological dilation");
    for (CLI::App* s : {erode, dilate}) {
        add_in(s);
        add_out(s);
        add_coef(s, "--d11", mp.D11);
        add_coef(s, "--d44", mp.D44);
        s->add_option("--eta", mp.eta, "Hamiltonian exponent")->check(CLI::Range(0.5, 1e9))->capture_default_str();
        add_time(s, mp.t, mp.dt);
        add_boundary(s, Boundary::reflecting);
    }
    erode->add_flag("--adaptive", adaptive, "angular erosion with D44(U) = phi(Delta U - c)");
    erode->add_option("--c", mp.c, "adaptive offset")->capture_default_str();
    erode->add_option("--phi-exponent", mp.phi_exponent)->check(CLI::PositiveNumber)->capture_default_str();

    // pseudo
    CLI::App* pseudo = app.add_subcommand("pseudo", "pseudo-linear scale space between diffusion and dilation");
    double C = 0;
    bool conjugated = false;
    add_in(pseudo);
    add_out(pseudo);
    pseudo->add_option("--C", C, "balance (0 = diffusion)")->required();
    add_coef(pseudo, "--d11", dp.D11);
    add_coef(pseudo, "--d33", dp.D33);
    add_coef(pseudo, "--d44", dp.D44);
    add_time(pseudo, dp.t, dp.dt);
    pseudo->add_flag("--conjugated", conjugated, "evaluate as chi^-1 o diffusion o chi");
    add_boundary(pseudo, Boundary::reflecting);

    // kernel
    CLI::App* kernel = app.add_subcommand("kernel", "sample a kernel on a grid");
    std::array<int, 3> dims{9, 9, 9};
    std::vector<int> origin;
    double h = 1;
    int order = 2;
    add_out(kernel);
    add_kernel_options(kernel, ko);
    auto add_grid = [&](CLI::App* s) {
        s->add_option("--dims", dims, "grid size")->check(CLI::PositiveNumber)->capture_default_str();
        s->add_option("--spacing", h, "voxel spacing")->check(CLI::PositiveNumber)->capture_default_str();
        s->add_option("--order", order, "tessellation order")->check(CLI::Range(0, kMaxTessellationOrder))->capture_default_str();
        s->add_option("--origin", origin, "source voxel (default: centre)")->expected(3);
    };
    add_grid(kernel);

    // convolve
    CLI::App* convolve = app.add_subcommand("convolve", "group convolution with a kernel");
    std::string mode = "linear";
    int radius = -1;
    bool no_window_check = false;
    add_in(convolve);
    add_out(convolve);
    add_kernel_options(convolve, ko);
    convolve->add_option("--mode", mode, "linear, erosion or dilation")
        ->check(CLI::IsMember({"linear", "erosion", "dilation"}))
        ->capture_default_str();
    convolve->add_option("--radius", radius, "window radius in voxels (default: 99% of the Gaussian estimate)")
        ->check(CLI::NonNegativeNumber);
    convolve->add_flag("--no-window-check", no_window_check);
    add_boundary(convolve, Boundary::periodic);

    // geodesic
    CLI::App* geodesic = app.add_subcommand("geodesic", "stationary curve from the curvature ODE, as CSV");
    GeodesicInit gi;
    std::vector<double> z0{0, 0}, dz0{0, 0};
    add_out(geodesic);
    geodesic->add_option("--beta", gi.beta)->check(CLI::PositiveNumber)->capture_default_str();
    geodesic->add_option("--z0", z0)->expected(2)->capture_default_str();
    geodesic->add_option("--dz0", dz0, "z'(0)")->expected(2)->capture_default_str();
    geodesic->add_option("--L", gi.L, "arc length")->check(CLI::NonNegativeNumber)->capture_default_str();
    geodesic->add_option("--ds", gi.ds)->check(CLI::PositiveNumber)->capture_default_str();

    // mc
    CLI::App* mc = app.add_subcommand("mc", "empirical kernel from random walks");
    WalkParams wp;
    int l0 = 0;
    bool wrap = false;
    add_out(mc);
    mc->add_option("--a3", wp.a3)->capture_default_str();
    add_coef(mc, "--d11", wp.D11);
    add_coef(mc, "--d33", wp.D33);
    add_coef(mc, "--d44", wp.D44);
    mc->add_option("--ds", wp.ds)->check(CLI::PositiveNumber)->capture_default_str();
    mc->add_option("--steps", wp.steps)->check(CLI::NonNegativeNumber)->capture_default_str();
    mc->add_option("--samples", wp.samples)->check(CLI::PositiveNumber)->capture_default_str();
    mc->add_option("--seed", wp.seed)->capture_default_str();
    mc->add_option("--l0", l0, "start direction index")->check(CLI::NonNegativeNumber)->capture_default_str();
    mc->add_flag("--wrap", wrap, "wrap walks periodically instead of dropping escapes");
    add_grid(mc);

    // glyphs
    CLI::App* glyphs = app.add_subcommand("glyphs", "glyph surfaces as CSV or OBJ (by extension)");
    double mu = 1;
    std::vector<std::size_t> voxels;
    add_in(glyphs);
    add_out(glyphs);
    glyphs->add_option("--mu", mu, "glyph scale")->check(CLI::PositiveNumber)->capture_default_str();
    glyphs->add_option("--voxel", voxels, "voxel indices (default: all)");

    // sharpen
    CLI::App* sharpen = app.add_subcommand("sharpen", "min-max normalisation or power transform");
    double power = 0;
    add_in(sharpen);
    add_out(sharpen);
    sharpen->add_option("--power", power, "exponent p > 0 (0 = min-max)")->check(CLI::NonNegativeNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kArgs;
    }
    set_thread_count(threads);

    try {
        CLI::App* used = app.get_subcommands().front();
        const Boundary boundary = boundaries.count(used) ? boundaries[used] : Boundary::reflecting;
        if (used == info) {
            const OrientationField U = load_field(in);
            std::cout << "dims " << U.dims[0] << ' ' << U.dims[1] << ' ' << U.dims[2] << '\n'
                      << "directions " << U.directions() << '\n'
                      << "h " << U.h << '\n'
                      << "min " << U.min() << '\n'
                      << "max " << U.max() << '\n'
                      << "mass " << U.mass() << '\n';
            return kOk;
        }
        if (used == geodesic) {
            gi.z0 = Vec2(z0[0], z0[1]);
            gi.dz0 = Vec2(dz0[0], dz0[1]);
            const auto curve = integrate_frenet(gi);
            write_or_throw(out, [&](std::ostream& os) { write_curve_csv(os, curve); });
            std::cout << "samples " << curve.size() << "\nmomentum_check " << momentum_check(curve, gi) << '\n';
        } else if (used == kernel || used == mc) {
            if (origin.empty()) origin = {dims[0] / 2, dims[1] / 2, dims[2] / 2};
            const std::array<int, 3> o{origin[0], origin[1], origin[2]};
            for (int d = 0; d < 3; ++d)
                if (o[d] < 0 || o[d] >= dims[d]) throw Error("origin outside the grid");
            auto tess = make_tessellation(order);
            if (used == kernel) {
                save_field(out, sample_kernel(make_kernel(ko), dims, h, tess, o));
            } else {
                if (l0 >= tess->size()) throw Error("start direction index out of range");
                const auto k = empirical_kernel(wp, dims, h, tess, o, l0, wrap);
                save_field(out, k.field);
                std::cout << "escaped " << k.escaped << " of " << wp.samples << '\n';
            }
        } else {
            const OrientationField U = load_field(in);
            OrientationField V;
            if (used == diffuse) {
                dp.a3 = 0;
                dp.boundary = boundary;
                dp.angular = angular;
                V = dp.K > 0 ? run_perona_malik(U, dp) : run_enhancement(U, dp);
            } else if (used == complete) {
                dp.boundary = boundary;
                if (lambda > 0)
                    V = gamma ? gamma_weighted(U, lambda, ksteps, dp) : k_step(U, lambda, ksteps, dp);
                else
                    V = run_completion(U, dp);
            } else if (used == erode || used == dilate) {
                mp.boundary = boundary;
                if (used == dilate)
                    V = run_dilation(U, mp);
                else
                    V = adaptive ? run_adaptive_erosion(U, mp) : run_erosion(U, mp);
            } else if (used == pseudo) {
                dp.a3 = 0;
                dp.boundary = boundary;
                V = conjugated ? run_pseudolinear_conjugated(U, C, dp) : run_pseudolinear_direct(U, C, dp);
            } else if (used == convolve) {
                if ((mode == "linear") == (ko.kind == "morph"))
                    throw Error("morph kernels go with --mode erosion/dilation, the others with --mode linear");
                const KernelFn p = make_kernel(ko);
                if (radius < 0) {
                    const double d33 = ko.kind == "morph" ? std::max(ko.D11, 1e-3) : ko.D33;
                    const KernelFn g = [&](const Vec3& y, const Vec3& n) {
                        return gaussian_estimate_kernel(y, n, ko.t, d33, ko.D44);
                    };
                    radius = kernel_window_radius(g, *U.tess, U.h);
                    std::cout << "radius " << radius << '\n';
                }
                if (mode == "linear")
                    V = r3s2_convolve(U, p, radius, boundary, !no_window_check);
                else
                    V = morph_convolve(U, p, mode == "erosion" ? MorphMode::erosion : MorphMode::dilation, radius, boundary);
            } else if (used == glyphs) {
                if (voxels.empty())
                    for (std::size_t v = 0; v < U.voxels(); ++v) voxels.push_back(v);
                for (std::size_t v : voxels)
                    if (v >= U.voxels()) throw Error("voxel index out of range");
                const auto g = export_glyphs(U, mu, voxels);
                const bool obj = out.size() >= 4 && out.compare(out.size() - 4, 4, ".obj") == 0;
                write_or_throw(out, [&](std::ostream& os) {
                    if (obj)
                        write_glyphs_obj(os, g, *U.tess);
                    else
                        write_glyphs_csv(os, g);
                });
            } else if (used == sharpen) {
                V = power > 0 ? power_transform(U, power) : minmax_sharpen(U);
            }
            if (!V.data.empty()) save_field(out, V);
        }
        write_manifest(out, *used);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const UnstableStep& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const CurvatureBlowup& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const WindowTooSmall& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kArgs;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return kNumeric;
    }
    return kOk;
}
