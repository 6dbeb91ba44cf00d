#pragma once

#include <ptreg/assembly.hpp>
#include <ptreg/controller.hpp>
#include <ptreg/driver.hpp>
#include <ptreg/error.hpp>
#include <ptreg/estimator.hpp>
#include <ptreg/mesh.hpp>
#include <ptreg/problems.hpp>
#include <ptreg/quadrature.hpp>
#include <ptreg/vtk.hpp>
