#ifndef CHEMODG_CHEMODG_HPP
#define CHEMODG_CHEMODG_HPP

// Umbrella header.

#include "chemodg/analysis.hpp"
#include "chemodg/basis.hpp"
#include "chemodg/dg_space.hpp"
#include "chemodg/driver.hpp"
#include "chemodg/forms.hpp"
#include "chemodg/mesh2d.hpp"
#include "chemodg/problems.hpp"
#include "chemodg/quadrature.hpp"
#include "chemodg/sparse.hpp"
#include "chemodg/stepper.hpp"
#include "chemodg/vtk.hpp"

#endif  // CHEMODG_CHEMODG_HPP
