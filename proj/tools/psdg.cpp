// SPDX-License-Identifier: Apache-2.0
//
// psdg: polytopal dG solver for the pseudo-stress formulation of the
// unsteady Stokes problem.  Subcommands: mesh-gen, run, convergence.

#include "psdg/runner.hpp"

int main(int argc, char** argv) { return psdg::cli_main(argc, argv); }
