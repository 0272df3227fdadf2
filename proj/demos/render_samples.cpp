// Renders a handful of samples from each generator into PGM files, as a quick
// visual check of the toolkit. Usage: render_samples [out_dir]

#include <cstdio>
#include <filesystem>
#include <string>

#include "psikit/psikit.hpp"

using namespace psikit;

int main(int argc, char** argv) {
  const std::filesystem::path out = argc > 1 ? argv[1] : "render_samples_out";
  std::filesystem::create_directories(out);

  PolygonSpec poly;
  poly.n = 7;
  poly.radius = 0.8;
  poly.radial_jitter = 0.2;
  poly.angular_jitter = 0.15;
  poly.seed = 5;
  const auto verts = gen_polygon_vertices(poly);
  write_file(out / "heptagon-filled.pgm", write_pgm(rasterize_filled(verts, 64, 64).image));
  write_file(out / "heptagon-outline.pgm",
             write_pgm(rasterize_outline(verts, 2.0, 64, 64).image));

  GrayImage noisy = apply_noise(rasterize_filled(verts, 64, 64).image, {0.08, 0.10, 99});
  write_file(out / "heptagon-noisy.pgm", write_pgm(noisy));

  MeshSpec mesh;
  mesh.view_rotation = {0.5, 0.8, 0.2};
  for (int c = 0; c < 5; ++c) {
    mesh.class_id = static_cast<PolyhedronClass>(c);
    mesh.render_mode = RenderMode::Shaded;
    write_file(out / (std::string(to_string(mesh.class_id)) + "-shaded.pgm"),
               write_pgm(project_and_render(gen_mesh(mesh.class_id), mesh, 64, 64)));
    mesh.render_mode = RenderMode::Wireframe;
    write_file(out / (std::string(to_string(mesh.class_id)) + "-wireframe.pgm"),
               write_pgm(project_and_render(gen_mesh(mesh.class_id), mesh, 64, 64)));
  }

  for (int digit = 0; digit <= 9; ++digit) {
    const FontStyle& style = font_style_presets()[static_cast<std::size_t>(digit * 3)];
    write_file(out / (style.name + "_" + std::to_string(digit) + ".pgm"),
               write_pgm(render_glyph(digit, style)));
  }

  std::printf("wrote samples to %s\n", out.string().c_str());
  return 0;
}
