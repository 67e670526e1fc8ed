import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // the end-to-end test spawns the real service and solves two small
    // policies first, which takes a little while
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
