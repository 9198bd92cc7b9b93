import { defineConfig } from "vitest/config";

// Boots a real service (python3 -m placekit serve) and tests against it.
export default defineConfig({
  test: {
    include: ["tests/server_roundtrip.test.ts"],
    environment: "node",
    hookTimeout: 180_000,
    testTimeout: 120_000,
  },
});
